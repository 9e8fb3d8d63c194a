#pragma once

#include "nester/data.hpp"

namespace nester {

/// Unweighted directed graph over sentence tokens.
struct DirectedGraph {
  Index n = 0;
  std::vector<std::pair<Index, Index>> edges;

  Mat adjacency() const;  // n x n, entry (i, j) = 1 for edge i -> j
};

/// Score graph: edges carry the max-pooled span-type probability.
struct WeightedGraph {
  struct Edge {
    Index from, to;
    Real weight;
  };
  Index n = 0;
  std::vector<Edge> edges;
};

/// Entity graph: every ordered in-span pair (i, j), i < j, of each span.
DirectedGraph build_entity_graph(const std::vector<EntitySpan>& flat_spans, Index n);

/// Adjacent graph: one edge from each word to its right neighbor.
DirectedGraph build_adjacent_graph(Index n);

/// One Bi-GCN layer: separate outgoing/incoming message parameters.
struct BiGcnParams {
  Tensor w_out, b_out;  // d_in x d_f, 1 x d_f
  Tensor w_in, b_in;

  static BiGcnParams init(Index d_in, Index d_f, std::mt19937_64& rng);
  std::vector<Tensor> params() const { return {w_out, b_out, w_in, b_in}; }
};

/// f_i = [ReLU(sum over outgoing (i,j) of a_ij (W_out x_j + b_out));
///        ReLU(sum over incoming (j,i) of a_ji (W_in x_j + b_in))].
/// adjacency may be a 0/1 constant or a differentiable gate matrix.
Tensor bigcn(const Tensor& x, const Tensor& adjacency, const BiGcnParams& p);

/// Resolves the max-probability type of one score row. Ties that include
/// 'O' resolve to 'O'; ties among entity types resolve to the lowest id.
Index argmax_type(const Eigen::Ref<const Eigen::RowVectorXd>& probs, Index o_id);

/// Max-pooled score graph over cells i <= j whose argmax type is not 'O'.
WeightedGraph score_to_graph(const Mat& scores, Index n, Index o_id);

/// Differentiable twin of score_to_graph: an n x n gate matrix holding the
/// selected probability (gradients flow through the picked maximum).
Tensor span_gate(const Tensor& scores, Index n, Index o_id);

/// Every cell i <= j whose argmax type is an entity type, as spans.
std::vector<EntitySpan> decode_inner(const Mat& scores, Index n, Index o_id);

/// Weighted cross entropy over cells i <= j: 'O' cells weigh 1, entity
/// cells weigh lambda1. Probabilities are clamped at eps before the log.
Tensor inner_loss(const Tensor& scores, const GoldScoreTensor& gold, Real lambda1,
                  Real eps = 1e-12);

struct GraphConfig {
  Index d_x = 512;
  Index d_f = 256;
  Index num_labels = 0;  // entity types + 'O'
  bool linear_features = false;  // ablation: replace both graphs by a linear map

  void validate() const;
};

/// Graph module: Bi-GCN features over the entity and adjacent graphs, the
/// pairwise span scorer, and the gated feedback representation.
class GraphModule {
 public:
  GraphModule() = default;
  GraphModule(GraphConfig cfg, std::mt19937_64& rng);

  /// Aggregated graph feature F (n x d_f) from both graphs.
  Tensor features(const Tensor& x, const Tensor& adj_entity, const Tensor& adj_adjacent) const;
  /// F = W_c(P1 f1 + P2 f2 concatenated) + b_c with per-graph projections.
  Tensor aggregate(const Tensor& f_entity, const Tensor& f_adjacent) const;
  /// Span-type probabilities, shape {n, n, L}, softmax over types.
  Tensor entity_scores(const Tensor& f) const;
  /// x_new = (x W_r + b_r) + projected Bi-GCN(x, gate)  (n x d_f).
  Tensor feedback(const Tensor& x, const Tensor& gate) const;

  std::vector<Tensor> params() const;
  const GraphConfig& config() const { return cfg_; }

  BiGcnParams gcn_entity, gcn_adjacent, gcn_score;
  Tensor proj_entity, proj_adjacent, proj_score;  // 2d_f x d_f
  Tensor w_combine, b_combine;                    // 2d_f x d_f, 1 x d_f
  Tensor w_pair_start, w_pair_end;                // d_f x d_f/2
  Tensor w_type;                                  // d_f x L
  Tensor w_keep, b_keep;                          // d_x x d_f, 1 x d_f
  Tensor w_linear, b_linear;                      // d_x x d_f (ablation only)

 private:
  GraphConfig cfg_;
};

}  // namespace nester
