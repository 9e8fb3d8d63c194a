#include "nester/flat.hpp"

#include <algorithm>
#include <limits>

namespace nester {

Crf::Crf(Index num_labels, Tensor trans) : transitions(std::move(trans)), k_(num_labels) {
  if (transitions.rows() != k_ + 2 || transitions.cols() != k_ + 2) {
    throw ShapeError("crf: transition matrix must be " + std::to_string(k_ + 2) + "x" +
                     std::to_string(k_ + 2) + ", got " + shape_to_string(transitions.shape()));
  }
}

Crf Crf::init(Index num_labels) {
  return Crf(num_labels, Tensor::zeros({num_labels + 2, num_labels + 2}, true));
}

void Crf::check_labels(const std::vector<Index>& y, Index n) const {
  if (static_cast<Index>(y.size()) != n) {
    throw ShapeError("crf: label sequence length " + std::to_string(y.size()) +
                     " does not match " + std::to_string(n) + " emission rows");
  }
  for (Index l : y) {
    if (l < 0 || l >= k_) throw ShapeError("crf: label id " + std::to_string(l) + " out of range");
  }
}

Tensor Crf::score(const Tensor& emissions, const std::vector<Index>& y) const {
  const Index n = emissions.rows();
  if (emissions.cols() != k_) {
    throw ShapeError("crf: emissions have " + std::to_string(emissions.cols()) + " labels, expected " +
                     std::to_string(k_));
  }
  check_labels(y, n);
  const Index w = k_ + 2;
  std::vector<Index> em_idx, tr_idx;
  em_idx.reserve(n);
  tr_idx.reserve(n + 1);
  tr_idx.push_back(start_state() * w + y[0]);
  for (Index i = 0; i < n; ++i) {
    em_idx.push_back(i * k_ + y[i]);
    if (i + 1 < n) tr_idx.push_back(y[i] * w + y[i + 1]);
  }
  tr_idx.push_back(y[n - 1] * w + stop_state());
  return add(pick_sum(emissions, em_idx), pick_sum(transitions, tr_idx));
}

Tensor Crf::log_partition(const Tensor& emissions) const {
  const Index n = emissions.rows();
  if (n < 1) throw ShapeError("crf: empty emission sequence");
  Tensor core_t = transpose(slice_rows(slice_cols(transitions, 0, k_), 0, k_));  // (to, from)
  Tensor start_row = slice_cols(slice_rows(transitions, start_state(), 1), 0, k_);
  Tensor stop_col = transpose(slice_rows(slice_cols(transitions, stop_state(), 1), 0, k_));

  Tensor alpha = add(start_row, slice_rows(emissions, 0, 1));
  for (Index i = 1; i < n; ++i) {
    Tensor moved = transpose(logsumexp_lastaxis(add_rowvec(core_t, alpha)));
    alpha = add(moved, slice_rows(emissions, i, 1));
  }
  return logsumexp_lastaxis(add(alpha, stop_col));
}

Tensor Crf::nll(const Tensor& emissions, const std::vector<Index>& y) const {
  return add(log_partition(emissions), scale(score(emissions, y), -1.0));
}

Real Crf::score_value(const Mat& emissions, const std::vector<Index>& y) const {
  const Index n = emissions.rows();
  const Mat& t = transitions.value();
  Real s = t(start_state(), y[0]) + emissions(0, y[0]);
  for (Index i = 1; i < n; ++i) s += t(y[i - 1], y[i]) + emissions(i, y[i]);
  return s + t(y[n - 1], stop_state());
}

std::pair<std::vector<Index>, Real> Crf::viterbi(const Mat& emissions) const {
  const Index n = emissions.rows();
  if (n < 1) throw ShapeError("crf: empty emission sequence");
  if (emissions.cols() != k_) {
    throw ShapeError("crf: emissions have " + std::to_string(emissions.cols()) + " labels, expected " +
                     std::to_string(k_));
  }
  const Mat& t = transitions.value();

  // Suffix DP so the greedy trace runs front to back: ties then resolve to
  // the lexicographically smallest optimal sequence.
  Mat beta(n, k_);
  for (Index k = 0; k < k_; ++k) beta(n - 1, k) = t(k, stop_state());
  for (Index i = n - 2; i >= 0; --i) {
    for (Index k = 0; k < k_; ++k) {
      Real best = -std::numeric_limits<Real>::infinity();
      for (Index j = 0; j < k_; ++j) {
        best = std::max(best, t(k, j) + emissions(i + 1, j) + beta(i + 1, j));
      }
      beta(i, k) = best;
    }
  }

  std::vector<Index> y(n);
  Real best = -std::numeric_limits<Real>::infinity();
  Index pick = 0;
  for (Index k = 0; k < k_; ++k) {
    Real s = t(start_state(), k) + emissions(0, k) + beta(0, k);
    if (s > best) {
      best = s;
      pick = k;
    }
  }
  y[0] = pick;
  for (Index i = 1; i < n; ++i) {
    best = -std::numeric_limits<Real>::infinity();
    pick = 0;
    for (Index k = 0; k < k_; ++k) {
      Real s = t(y[i - 1], k) + emissions(i, k) + beta(i, k);
      if (s > best) {
        best = s;
        pick = k;
      }
    }
    y[i] = pick;
  }
  return {y, score_value(emissions, y)};
}

void apply_bioes_constraints(Mat& transitions, Index num_types) {
  const Index k = 4 * num_types + 1;
  if (transitions.rows() != k + 2 || transitions.cols() != k + 2) {
    throw ShapeError("apply_bioes_constraints: expected " + std::to_string(k + 2) + " states");
  }
  const Index o = 4 * num_types;
  const Index start = k;
  const Index stop = k + 1;

  auto role = [o](Index tag) -> int {
    return tag == o ? 4 : static_cast<int>(tag % 4);  // 0=B,1=I,2=E,3=S,4=O
  };
  auto type_of = [](Index tag) { return tag / 4; };

  auto allowed = [&](Index from, Index to) {
    if (to == start || from == stop) return false;
    if (from == start) {
      if (to == stop) return false;
      int r = role(to);
      return r == 0 || r == 3 || r == 4;  // B, S, O open a sentence
    }
    int fr = role(from);
    if (fr == 0 || fr == 1) {  // B-t or I-t continue only inside the same span
      if (to == stop) return false;
      int tr = role(to);
      return (tr == 1 || tr == 2) && type_of(to) == type_of(from);
    }
    // E-t, S-t and O close a segment: anything that starts a new one.
    if (to == stop) return true;
    int tr = role(to);
    return tr == 0 || tr == 3 || tr == 4;
  };

  for (Index a = 0; a < k + 2; ++a) {
    for (Index b = 0; b < k + 2; ++b) {
      if (!allowed(a, b)) transitions(a, b) = kForbiddenTransition;
    }
  }
}

FlatEncoder::FlatEncoder(Index d_ctx, Index d_feedback, Index hidden, Index num_labels,
                         std::mt19937_64& rng) {
  auto make_dir = [&](Direction& d) {
    d.w_ih_ctx = Tensor::from_mat(uniform_init(d_ctx, 4 * hidden, d_ctx, rng), true);
    d.w_ih_fb = Tensor::from_mat(uniform_init(d_feedback, 4 * hidden, d_feedback, rng), true);
    d.w_hh = Tensor::from_mat(uniform_init(hidden, 4 * hidden, hidden, rng), true);
    d.b = Tensor::zeros({1, 4 * hidden}, true);
  };
  make_dir(fwd);
  make_dir(bwd);
  emit_w = Tensor::from_mat(uniform_init(2 * hidden, num_labels, 2 * hidden, rng), true);
  emit_b = Tensor::zeros({1, num_labels}, true);
}

Tensor FlatEncoder::emissions(const Tensor& x, FlatInput kind) const {
  const bool ctx = kind == FlatInput::context;
  auto hf = lstm_run(ctx ? fwd.w_ih_ctx : fwd.w_ih_fb, fwd.w_hh, fwd.b, x, false);
  auto hb = lstm_run(ctx ? bwd.w_ih_ctx : bwd.w_ih_fb, bwd.w_hh, bwd.b, x, true);
  std::vector<Tensor> rows;
  rows.reserve(hf.size());
  for (size_t i = 0; i < hf.size(); ++i) rows.push_back(concat_cols(hf[i], hb[i]));
  return add_rowvec(matmul(concat_rows(rows), emit_w), emit_b);
}

std::vector<Tensor> FlatEncoder::params() const {
  std::vector<Tensor> out;
  for (const Direction* d : {&fwd, &bwd}) {
    out.push_back(d->w_ih_ctx);
    out.push_back(d->w_ih_fb);
    out.push_back(d->w_hh);
    out.push_back(d->b);
  }
  out.push_back(emit_w);
  out.push_back(emit_b);
  return out;
}

}  // namespace nester
