#pragma once

#include "nester/tensor.hpp"

namespace nester {

/// One LSTM direction: input-to-hidden, hidden-to-hidden, gate bias.
/// Gate layout along the 4h axis is [input, forget, cell, output].
struct LstmCell {
  Tensor w_ih;  // d_in x 4h
  Tensor w_hh;  // h x 4h
  Tensor b;     // 1 x 4h

  static LstmCell init(Index input_dim, Index hidden, std::mt19937_64& rng);
  Index hidden() const { return w_hh.rows(); }
  std::vector<Tensor> params() const { return {w_ih, w_hh, b}; }
};

/// Runs one direction over the rows of x (steps x d_in) and returns the
/// hidden state per step, indexed by input row. reverse=true consumes rows
/// from the end; outputs stay aligned with input positions.
std::vector<Tensor> lstm_run(const Tensor& w_ih, const Tensor& w_hh, const Tensor& b,
                             const Tensor& x, bool reverse);

inline std::vector<Tensor> lstm_run(const LstmCell& cell, const Tensor& x, bool reverse) {
  return lstm_run(cell.w_ih, cell.w_hh, cell.b, x, reverse);
}

/// Direction-concatenated BiLSTM encoding, steps x 2h.
Tensor bilstm_encode(const LstmCell& fwd, const LstmCell& bwd, const Tensor& x);

}  // namespace nester
