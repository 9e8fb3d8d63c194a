#pragma once

#include "nester/flat.hpp"
#include "nester/graph.hpp"
#include "nester/representation.hpp"

namespace nester {

enum class Variant { full, no_graph, no_feedback };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct Hyperparams {
  Real lr_flat = 0.015;
  Real lr_graph = 0.001;
  Real dropout = 0.5;
  Index hidden_bilstm = 256;
  Index hidden_gcn = 256;
  Real lambda1 = 1.5;
  Real lambda2 = 1.5;
  Index batch_size = 10;
  Index epochs = 100;
  std::uint64_t seed = 1;
  Index d_w = 100;
  Index d_c = 50;

  void validate() const;
};

/// The full pipeline for one sentence. Tensors are alive as long as the
/// result is; losses are only built when gold annotations are supplied.
struct SentenceRun {
  std::vector<Index> y_first;            // first-pass decode
  std::vector<EntitySpan> spans_first;   // its spans (seed of the entity graph)
  std::vector<Index> y_final;            // decode used for predictions
  std::vector<EntitySpan> pred_outer;
  std::vector<EntitySpan> pred_inner;
  Tensor scores;                         // {n, n, L}
  Tensor loss_outer, loss_inner;         // defined when gold was given

  std::vector<EntitySpan> predictions() const;  // outer union inner, deduplicated
};

class Model {
 public:
  Model(LabelInventory labels, Hyperparams hp, Variant variant, const EmbeddingTable& table,
        const CharInventory& chars);

  /// Runs flat decode -> entity graph -> graph features -> span scores ->
  /// score graph -> feedback representation -> second flat decode. With
  /// gold annotations it also builds the outer (both CRF passes) and inner
  /// (weighted cross entropy) losses.
  SentenceRun run(const std::vector<std::string>& tokens, const std::vector<EntitySpan>* gold,
                  bool training, std::mt19937_64& rng, EncodeCache* cache = nullptr) const;

  std::vector<EntitySpan> predict(const std::vector<std::string>& tokens) const;

  std::vector<Tensor> flat_group() const;   // representation + flat encoder + CRF
  std::vector<Tensor> graph_group() const;  // graph module
  std::vector<std::pair<std::string, Tensor>> named_params() const;

  LabelInventory labels;
  Hyperparams hp;
  Variant variant = Variant::full;
  Representation repr;
  FlatEncoder flat;
  Crf crf;
  GraphModule graph;

 private:
  mutable std::mt19937_64 eval_rng_{0};  // never consumed: eval paths take no draws
};

}  // namespace nester
