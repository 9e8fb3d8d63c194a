#include "nester/lstm.hpp"

namespace nester {

LstmCell LstmCell::init(Index input_dim, Index hidden, std::mt19937_64& rng) {
  LstmCell c;
  c.w_ih = Tensor::from_mat(uniform_init(input_dim, 4 * hidden, input_dim, rng), true);
  c.w_hh = Tensor::from_mat(uniform_init(hidden, 4 * hidden, hidden, rng), true);
  c.b = Tensor::zeros({1, 4 * hidden}, true);
  return c;
}

std::vector<Tensor> lstm_run(const Tensor& w_ih, const Tensor& w_hh, const Tensor& b,
                             const Tensor& x, bool reverse) {
  const Index steps = x.rows();
  const Index hidden = w_hh.rows();
  if (x.cols() != w_ih.rows()) {
    throw ShapeError("lstm_run: input width " + std::to_string(x.cols()) +
                     " does not match w_ih rows " + std::to_string(w_ih.rows()));
  }

  // Input projections for all steps at once.
  Tensor zx = add_rowvec(matmul(x, w_ih), b);

  std::vector<Tensor> out(steps);
  Tensor h = Tensor::zeros({1, hidden});
  Tensor c = Tensor::zeros({1, hidden});
  for (Index s = 0; s < steps; ++s) {
    Index t = reverse ? steps - 1 - s : s;
    Tensor z = (s == 0) ? slice_rows(zx, t, 1)
                        : add(slice_rows(zx, t, 1), matmul(h, w_hh));
    Tensor gi = sigmoid(slice_cols(z, 0, hidden));
    Tensor gf = sigmoid(slice_cols(z, hidden, hidden));
    Tensor gc = tanh_op(slice_cols(z, 2 * hidden, hidden));
    Tensor go = sigmoid(slice_cols(z, 3 * hidden, hidden));
    c = (s == 0) ? cmul(gi, gc) : add(cmul(gf, c), cmul(gi, gc));
    h = cmul(go, tanh_op(c));
    out[t] = h;
  }
  return out;
}

Tensor bilstm_encode(const LstmCell& fwd, const LstmCell& bwd, const Tensor& x) {
  auto hf = lstm_run(fwd, x, false);
  auto hb = lstm_run(bwd, x, true);
  std::vector<Tensor> rows;
  rows.reserve(hf.size());
  for (size_t i = 0; i < hf.size(); ++i) rows.push_back(concat_cols(hf[i], hb[i]));
  return concat_rows(rows);
}

}  // namespace nester
