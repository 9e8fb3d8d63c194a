#pragma once

#include "nester/data.hpp"
#include "nester/lstm.hpp"

namespace nester {

/// Linear-chain CRF over K labels with synthetic start/stop states. The
/// transition matrix is (K+2)x(K+2); entry (a, b) scores a -> b.
class Crf {
 public:
  Crf() = default;
  Crf(Index num_labels, Tensor transitions);
  static Crf init(Index num_labels);  // zero-initialized learnable transitions

  Index num_labels() const { return k_; }
  Index start_state() const { return k_; }
  Index stop_state() const { return k_ + 1; }

  /// Path score: start transition + emissions + pairwise transitions + stop.
  Tensor score(const Tensor& emissions, const std::vector<Index>& y) const;
  /// Log of the sum over all K^N paths, via the forward algorithm in log space.
  Tensor log_partition(const Tensor& emissions) const;
  /// log_partition - score; non-negative.
  Tensor nll(const Tensor& emissions, const std::vector<Index>& y) const;

  Real score_value(const Mat& emissions, const std::vector<Index>& y) const;
  /// Max-score sequence; exact ties resolve to the lexicographically
  /// smallest label sequence. Returned score re-evaluates score_value.
  std::pair<std::vector<Index>, Real> viterbi(const Mat& emissions) const;

  Tensor transitions;

 private:
  void check_labels(const std::vector<Index>& y, Index n) const;
  Index k_ = 0;
};

/// Fixed penalty for transitions the BIOES grammar forbids.
constexpr Real kForbiddenTransition = -1e4;

/// Writes kForbiddenTransition into every BIOES-invalid entry of a
/// (K+2)x(K+2) transition matrix for the given number of entity types.
void apply_bioes_constraints(Mat& transitions, Index num_types);

enum class FlatInput { context, feedback };

/// Flat-module encoder: a BiLSTM over the context representation (first
/// pass) or the graph feedback representation (second pass), followed by a
/// linear emission layer. Both passes share the recurrent weights, gate
/// biases and emission projection; only the input-to-hidden matrices are
/// per-input-width.
class FlatEncoder {
 public:
  FlatEncoder() = default;
  FlatEncoder(Index d_ctx, Index d_feedback, Index hidden, Index num_labels, std::mt19937_64& rng);

  Tensor emissions(const Tensor& x, FlatInput kind) const;  // N x K
  std::vector<Tensor> params() const;

  struct Direction {
    Tensor w_ih_ctx;  // d_ctx x 4h
    Tensor w_ih_fb;   // d_feedback x 4h
    Tensor w_hh;
    Tensor b;
  };
  Direction fwd, bwd;
  Tensor emit_w;  // 2h x K
  Tensor emit_b;  // 1 x K
};

}  // namespace nester
