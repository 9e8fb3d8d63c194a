#include "nester/eval.hpp"

#include <algorithm>
#include <chrono>
#include <ostream>
#include <set>

#include <json.hpp>

namespace nester {

namespace {

struct SentenceMatch {
  std::vector<EntitySpan> matched;    // gold == pred
  std::vector<EntitySpan> gold_only;  // false negatives
  std::vector<EntitySpan> pred_only;  // false positives
  std::set<EntitySpan> preds;         // deduplicated predictions
};

std::vector<SentenceMatch> match_sentences(const SpanSets& gold, const SpanSets& pred) {
  if (gold.size() != pred.size()) {
    throw DataError("score: " + std::to_string(gold.size()) + " gold sentences vs " +
                    std::to_string(pred.size()) + " predicted");
  }
  std::vector<SentenceMatch> out(gold.size());
  for (size_t s = 0; s < gold.size(); ++s) {
    std::set<EntitySpan> g(gold[s].begin(), gold[s].end());
    std::set<EntitySpan> p(pred[s].begin(), pred[s].end());
    out[s].preds = p;
    for (const auto& e : g) {
      (p.count(e) ? out[s].matched : out[s].gold_only).push_back(e);
    }
    for (const auto& e : p) {
      if (!g.count(e)) out[s].pred_only.push_back(e);
    }
  }
  return out;
}

bool contained_in_any(const EntitySpan& e, const std::set<EntitySpan>& others) {
  return std::any_of(others.begin(), others.end(),
                     [&](const EntitySpan& o) { return strictly_contains(o, e); });
}

}  // namespace

PRF PRF::from_counts(long tp, long fp, long fn) {
  PRF out;
  out.tp = tp;
  out.fp = fp;
  out.fn = fn;
  out.p = (tp + fp) > 0 ? static_cast<Real>(tp) / (tp + fp) : 1.0;
  out.r = (tp + fn) > 0 ? static_cast<Real>(tp) / (tp + fn) : 1.0;
  out.f1 = (out.p + out.r) > 0 ? 2 * out.p * out.r / (out.p + out.r) : 0.0;
  return out;
}

PRF score(const SpanSets& gold, const SpanSets& pred) {
  long tp = 0, fp = 0, fn = 0;
  for (const auto& m : match_sentences(gold, pred)) {
    tp += static_cast<long>(m.matched.size());
    fn += static_cast<long>(m.gold_only.size());
    fp += static_cast<long>(m.pred_only.size());
  }
  return PRF::from_counts(tp, fp, fn);
}

std::map<std::string, PRF> score_by_category(const SpanSets& gold, const SpanSets& pred,
                                             const LabelInventory& labels) {
  std::map<Index, std::array<long, 3>> counts;
  for (Index t = 0; t < labels.num_types(); ++t) counts[t] = {0, 0, 0};
  for (const auto& m : match_sentences(gold, pred)) {
    for (const auto& e : m.matched) counts[e.label][0]++;
    for (const auto& e : m.pred_only) counts[e.label][1]++;
    for (const auto& e : m.gold_only) counts[e.label][2]++;
  }
  std::map<std::string, PRF> out;
  for (const auto& [t, c] : counts) out[labels.type_name(t)] = PRF::from_counts(c[0], c[1], c[2]);
  return out;
}

namespace {

struct Stratified {
  // 0 = outermost, 1 = inner
  std::array<long, 2> tp{0, 0}, fp{0, 0}, fn{0, 0};
  // outermost length buckets
  std::map<Index, std::array<long, 3>> length;

  static Index bucket(const EntitySpan& e) { return std::min<Index>(e.length(), 10); }

  void add_outer_tp(const EntitySpan& e) {
    tp[0]++;
    length[bucket(e)][0]++;
  }
  void add_outer_fp(const EntitySpan& e) {
    fp[0]++;
    length[bucket(e)][1]++;
  }
  void add_outer_fn(const EntitySpan& e) {
    fn[0]++;
    length[bucket(e)][2]++;
  }
};

Stratified stratify(const SpanSets& gold, const SpanSets& pred) {
  Stratified st;
  auto matches = match_sentences(gold, pred);
  for (size_t s = 0; s < matches.size(); ++s) {
    LayerSplit split = split_layers(gold[s]);
    std::set<EntitySpan> gold_inner(split.inner.begin(), split.inner.end());
    const auto& m = matches[s];
    for (const auto& e : m.matched) {
      if (gold_inner.count(e)) st.tp[1]++; else st.add_outer_tp(e);
    }
    for (const auto& e : m.gold_only) {
      if (gold_inner.count(e)) st.fn[1]++; else st.add_outer_fn(e);
    }
    for (const auto& e : m.pred_only) {
      if (contained_in_any(e, m.preds)) st.fp[1]++; else st.add_outer_fp(e);
    }
  }
  return st;
}

}  // namespace

LayerScores score_by_layer(const SpanSets& gold, const SpanSets& pred) {
  Stratified st = stratify(gold, pred);
  return {PRF::from_counts(st.tp[0], st.fp[0], st.fn[0]),
          PRF::from_counts(st.tp[1], st.fp[1], st.fn[1])};
}

std::map<Index, PRF> score_by_length(const SpanSets& gold, const SpanSets& pred) {
  Stratified st = stratify(gold, pred);
  std::map<Index, PRF> out;
  for (Index b = 1; b <= 10; ++b) {
    auto it = st.length.find(b);
    if (it == st.length.end()) {
      out[b] = PRF::from_counts(0, 0, 0);
    } else {
      out[b] = PRF::from_counts(it->second[0], it->second[1], it->second[2]);
    }
  }
  return out;
}

EvalReport evaluate_spans(const SpanSets& gold, const SpanSets& pred, const LabelInventory& labels) {
  EvalReport r;
  r.overall = score(gold, pred);
  r.by_category = score_by_category(gold, pred, labels);
  r.by_layer = score_by_layer(gold, pred);
  r.by_length = score_by_length(gold, pred);
  return r;
}

namespace {

void print_row(std::ostream& out, const std::string& name, const PRF& x) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-16s %7.4f %7.4f %7.4f %8ld %8ld %8ld\n", name.c_str(), x.p,
                x.r, x.f1, x.tp, x.fp, x.fn);
  out << buf;
}

nlohmann::json record(const std::string& stratum, const PRF& x) {
  return {{"stratum", stratum}, {"p", x.p},   {"r", x.r},   {"f1", x.f1},
          {"tp", x.tp},         {"fp", x.fp}, {"fn", x.fn}};
}

}  // namespace

void write_report_table(std::ostream& out, const EvalReport& report) {
  out << "stratum                p       r      f1       tp       fp       fn\n";
  print_row(out, "overall", report.overall);
  for (const auto& [name, prf] : report.by_category) print_row(out, "type:" + name, prf);
  print_row(out, "layer:outermost", report.by_layer.outermost);
  print_row(out, "layer:inner", report.by_layer.inner);
  for (const auto& [b, prf] : report.by_length) print_row(out, "length:" + std::to_string(b), prf);
}

void write_report_records(std::ostream& out, const EvalReport& report) {
  out << record("overall", report.overall).dump() << "\n";
  for (const auto& [name, prf] : report.by_category) out << record("type:" + name, prf).dump() << "\n";
  out << record("layer:outermost", report.by_layer.outermost).dump() << "\n";
  out << record("layer:inner", report.by_layer.inner).dump() << "\n";
  for (const auto& [b, prf] : report.by_length) {
    out << record("length:" + std::to_string(b), prf).dump() << "\n";
  }
}

SpanSets predict_corpus(const Model& model, const Corpus& corpus) {
  SpanSets out;
  out.reserve(corpus.sentences.size());
  EncodeCache cache;
  std::mt19937_64 idle(0);
  for (const auto& s : corpus.sentences) {
    out.push_back(model.run(s.tokens, nullptr, false, idle, &cache).predictions());
  }
  return out;
}

SpanSets gold_spans(const Corpus& corpus) {
  SpanSets out;
  out.reserve(corpus.sentences.size());
  for (const auto& s : corpus.sentences) out.push_back(s.entities);
  return out;
}

PRF evaluate_model(const Model& model, const Corpus& corpus) {
  return score(gold_spans(corpus), predict_corpus(model, corpus));
}

ThroughputReport throughput(const Model& model, const Corpus& corpus, Index batch_size, int passes) {
  if (corpus.sentences.empty()) throw DataError("throughput: empty corpus");
  if (batch_size <= 0) throw DataError("throughput: batch size must be positive");
  if (passes < 3) passes = 3;

  long tokens = 0;
  for (const auto& s : corpus.sentences) tokens += static_cast<long>(s.tokens.size());

  auto run_pass = [&]() {
    EncodeCache cache;
    std::mt19937_64 idle(0);
    const auto& sents = corpus.sentences;
    for (size_t at = 0; at < sents.size(); at += batch_size) {
      size_t stop = std::min(sents.size(), at + batch_size);
      for (size_t i = at; i < stop; ++i) {
        model.run(sents[i].tokens, nullptr, false, idle, &cache);
      }
    }
  };

  run_pass();  // warmup
  std::vector<Real> times;
  for (int p = 0; p < passes; ++p) {
    auto t0 = std::chrono::steady_clock::now();
    run_pass();
    auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<Real>(t1 - t0).count());
  }
  std::sort(times.begin(), times.end());
  Real median = times[times.size() / 2];
  if (times.size() % 2 == 0) median = 0.5 * (median + times[times.size() / 2 - 1]);

  ThroughputReport r;
  r.tokens = tokens;
  r.seconds = median;
  r.tokens_per_second = tokens / median;
  r.batch_size = batch_size;
  r.passes = passes;
  return r;
}

}  // namespace nester
