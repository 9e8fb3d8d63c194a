#pragma once

#include "nester/model.hpp"

#include <iosfwd>
#include <map>

namespace nester {

struct PRF {
  Real p = 1.0, r = 1.0, f1 = 1.0;
  long tp = 0, fp = 0, fn = 0;

  static PRF from_counts(long tp, long fp, long fn);
};

using SpanSets = std::vector<std::vector<EntitySpan>>;

/// Exact-match (start, end, type) scoring pooled over the corpus;
/// duplicates within a sentence collapse.
PRF score(const SpanSets& gold, const SpanSets& pred);

/// Per entity type.
std::map<std::string, PRF> score_by_category(const SpanSets& gold, const SpanSets& pred,
                                             const LabelInventory& labels);

struct LayerScores {
  PRF outermost, inner;
};

/// Gold spans stratify by their own layer; matched predictions inherit the
/// matched gold's stratum; unmatched predictions stratify by containment
/// among the predictions themselves.
LayerScores score_by_layer(const SpanSets& gold, const SpanSets& pred);

/// Outermost spans only, bucketed by span length (lengths above 10 fall
/// into bucket 10).
std::map<Index, PRF> score_by_length(const SpanSets& gold, const SpanSets& pred);

struct EvalReport {
  PRF overall;
  std::map<std::string, PRF> by_category;
  LayerScores by_layer;
  std::map<Index, PRF> by_length;
};

EvalReport evaluate_spans(const SpanSets& gold, const SpanSets& pred, const LabelInventory& labels);

void write_report_table(std::ostream& out, const EvalReport& report);
void write_report_records(std::ostream& out, const EvalReport& report);

/// Predictions for every sentence of a corpus (evaluation mode).
SpanSets predict_corpus(const Model& model, const Corpus& corpus);

/// Gold spans of every sentence.
SpanSets gold_spans(const Corpus& corpus);

/// Overall PRF of a model on a corpus.
PRF evaluate_model(const Model& model, const Corpus& corpus);

struct ThroughputReport {
  long tokens = 0;
  Real seconds = 0;        // median pass
  Real tokens_per_second = 0;
  Index batch_size = 0;
  int passes = 0;
};

/// Median decoded tokens/second over timed full passes (after one warmup
/// pass), batched iteration.
ThroughputReport throughput(const Model& model, const Corpus& corpus, Index batch_size = 10,
                            int passes = 3);

}  // namespace nester
