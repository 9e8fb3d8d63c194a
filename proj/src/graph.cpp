#include "nester/graph.hpp"

#include <set>

namespace nester {

Mat DirectedGraph::adjacency() const {
  Mat a = Mat::Zero(n, n);
  for (const auto& [i, j] : edges) a(i, j) = 1.0;
  return a;
}

DirectedGraph build_entity_graph(const std::vector<EntitySpan>& flat_spans, Index n) {
  DirectedGraph g;
  g.n = n;
  std::set<std::pair<Index, Index>> edges;
  for (const auto& s : flat_spans) {
    if (s.start < 0 || s.end >= n) throw DataError("entity graph: span " + span_to_string(s) + " out of range");
    for (Index i = s.start; i <= s.end; ++i) {
      for (Index j = i + 1; j <= s.end; ++j) edges.emplace(i, j);
    }
  }
  g.edges.assign(edges.begin(), edges.end());
  return g;
}

DirectedGraph build_adjacent_graph(Index n) {
  if (n < 1) throw DataError("adjacent graph: empty sentence");
  DirectedGraph g;
  g.n = n;
  for (Index i = 0; i + 1 < n; ++i) g.edges.emplace_back(i, i + 1);
  return g;
}

BiGcnParams BiGcnParams::init(Index d_in, Index d_f, std::mt19937_64& rng) {
  BiGcnParams p;
  p.w_out = Tensor::from_mat(uniform_init(d_in, d_f, d_in, rng), true);
  p.b_out = Tensor::zeros({1, d_f}, true);
  p.w_in = Tensor::from_mat(uniform_init(d_in, d_f, d_in, rng), true);
  p.b_in = Tensor::zeros({1, d_f}, true);
  return p;
}

Tensor bigcn(const Tensor& x, const Tensor& adjacency, const BiGcnParams& p) {
  if (adjacency.rows() != x.rows() || adjacency.cols() != x.rows()) {
    throw ShapeError("bigcn: adjacency " + shape_to_string(adjacency.shape()) +
                     " does not match " + std::to_string(x.rows()) + " nodes");
  }
  Tensor msg_out = add_rowvec(matmul(x, p.w_out), p.b_out);
  Tensor msg_in = add_rowvec(matmul(x, p.w_in), p.b_in);
  Tensor f_out = relu(matmul(adjacency, msg_out));
  Tensor f_in = relu(matmul(transpose(adjacency), msg_in));
  return concat_cols(f_out, f_in);
}

Index argmax_type(const Eigen::Ref<const Eigen::RowVectorXd>& probs, Index o_id) {
  Real mx = probs.maxCoeff();
  if (probs(o_id) == mx) return o_id;
  for (Index k = 0; k < probs.size(); ++k) {
    if (probs(k) == mx) return k;
  }
  return o_id;
}

WeightedGraph score_to_graph(const Mat& scores, Index n, Index o_id) {
  WeightedGraph g;
  g.n = n;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      Index cell = i * n + j;
      Index k = argmax_type(scores.row(cell), o_id);
      if (k != o_id) g.edges.push_back({i, j, scores(cell, k)});
    }
  }
  return g;
}

Tensor span_gate(const Tensor& scores, Index n, Index o_id) {
  if (scores.rows() != n * n) throw ShapeError("span_gate: expected " + std::to_string(n * n) + " cells");
  std::vector<Index> pick(n * n, 0);
  std::vector<bool> keep(n * n, false);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      Index cell = i * n + j;
      Index k = argmax_type(scores.value().row(cell), o_id);
      pick[cell] = k;
      keep[cell] = k != o_id;
    }
  }
  return masked_pick_lastaxis(scores, pick, keep, {n, n});
}

std::vector<EntitySpan> decode_inner(const Mat& scores, Index n, Index o_id) {
  std::vector<EntitySpan> out;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      Index k = argmax_type(scores.row(i * n + j), o_id);
      if (k != o_id) out.push_back({i, j, k});
    }
  }
  return out;
}

Tensor inner_loss(const Tensor& scores, const GoldScoreTensor& gold, Real lambda1, Real eps) {
  if (lambda1 <= 0) throw NumericError("inner_loss: lambda1 must be positive");
  const Index n = gold.n;
  const Index l = gold.num_labels;
  if (scores.rows() != n * n || scores.cols() != l) {
    throw ShapeError("inner_loss: scores " + shape_to_string(scores.shape()) + " do not match gold " +
                     std::to_string(n) + "x" + std::to_string(n) + "x" + std::to_string(l));
  }
  Mat w = Mat::Zero(n * n, l);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      Index cell = i * n + j;
      Index t = gold.type_per_cell[cell];
      w(cell, t) = (t == l - 1) ? 1.0 : lambda1;
    }
  }
  Tensor weights = Tensor::from_mat(w, scores.shape(), false);
  return scale(sum_all(cmul(log_clamped(scores, eps), weights)), -1.0);
}

void GraphConfig::validate() const {
  if (d_x <= 0 || d_f <= 0) throw DataError("graph dims must be positive");
  if (d_f % 2 != 0) throw DataError("d_f must be even (pair scorer halves)");
  if (num_labels < 2) throw DataError("graph module needs at least one entity type plus 'O'");
}

GraphModule::GraphModule(GraphConfig cfg, std::mt19937_64& rng) : cfg_(cfg) {
  cfg_.validate();
  const Index d_x = cfg_.d_x;
  const Index d_f = cfg_.d_f;
  gcn_entity = BiGcnParams::init(d_x, d_f, rng);
  gcn_adjacent = BiGcnParams::init(d_x, d_f, rng);
  gcn_score = BiGcnParams::init(d_x, d_f, rng);
  proj_entity = Tensor::from_mat(uniform_init(2 * d_f, d_f, 2 * d_f, rng), true);
  proj_adjacent = Tensor::from_mat(uniform_init(2 * d_f, d_f, 2 * d_f, rng), true);
  proj_score = Tensor::from_mat(uniform_init(2 * d_f, d_f, 2 * d_f, rng), true);
  w_combine = Tensor::from_mat(uniform_init(2 * d_f, d_f, 2 * d_f, rng), true);
  b_combine = Tensor::zeros({1, d_f}, true);
  w_pair_start = Tensor::from_mat(uniform_init(d_f, d_f / 2, d_f, rng), true);
  w_pair_end = Tensor::from_mat(uniform_init(d_f, d_f / 2, d_f, rng), true);
  w_type = Tensor::from_mat(uniform_init(d_f, cfg_.num_labels, d_f, rng), true);
  w_keep = Tensor::from_mat(uniform_init(d_x, d_f, d_x, rng), true);
  b_keep = Tensor::zeros({1, d_f}, true);
  if (cfg_.linear_features) {
    w_linear = Tensor::from_mat(uniform_init(d_x, d_f, d_x, rng), true);
    b_linear = Tensor::zeros({1, d_f}, true);
  }
}

Tensor GraphModule::aggregate(const Tensor& f_entity, const Tensor& f_adjacent) const {
  Tensor both = concat_cols(matmul(f_entity, proj_entity), matmul(f_adjacent, proj_adjacent));
  return add_rowvec(matmul(both, w_combine), b_combine);
}

Tensor GraphModule::features(const Tensor& x, const Tensor& adj_entity,
                             const Tensor& adj_adjacent) const {
  if (cfg_.linear_features) {
    return add_rowvec(matmul(x, w_linear), b_linear);
  }
  return aggregate(bigcn(x, adj_entity, gcn_entity), bigcn(x, adj_adjacent, gcn_adjacent));
}

Tensor GraphModule::entity_scores(const Tensor& f) const {
  const Index n = f.rows();
  Tensor starts = matmul(f, w_pair_start);
  Tensor ends = matmul(f, w_pair_end);
  std::vector<Index> start_idx(n * n), end_idx(n * n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      start_idx[i * n + j] = i;
      end_idx[i * n + j] = j;
    }
  }
  Tensor pairs = concat_cols(gather_rows(starts, start_idx), gather_rows(ends, end_idx));
  Tensor logits = matmul(relu(pairs), w_type);
  return reshape(softmax_lastaxis(logits), {n, n, cfg_.num_labels});
}

Tensor GraphModule::feedback(const Tensor& x, const Tensor& gate) const {
  Tensor keep = add_rowvec(matmul(x, w_keep), b_keep);
  Tensor inner = matmul(bigcn(x, gate, gcn_score), proj_score);
  return add(keep, inner);
}

std::vector<Tensor> GraphModule::params() const {
  std::vector<Tensor> out;
  if (cfg_.linear_features) {
    out.push_back(w_linear);
    out.push_back(b_linear);
  } else {
    for (const auto* g : {&gcn_entity, &gcn_adjacent}) {
      for (const auto& p : g->params()) out.push_back(p);
    }
    out.push_back(proj_entity);
    out.push_back(proj_adjacent);
    out.push_back(w_combine);
    out.push_back(b_combine);
  }
  for (const auto& p : gcn_score.params()) out.push_back(p);
  out.push_back(proj_score);
  out.push_back(w_pair_start);
  out.push_back(w_pair_end);
  out.push_back(w_type);
  out.push_back(w_keep);
  out.push_back(b_keep);
  return out;
}

}  // namespace nester
