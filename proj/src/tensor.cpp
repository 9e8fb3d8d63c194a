#include "nester/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace nester {

namespace {

Index shape_size(const Shape& s) {
  Index n = 1;
  for (Index d : s) n *= d;
  return n;
}

void check_shape(const Shape& s) {
  if (s.empty()) throw ShapeError("tensor shape must have at least one dimension");
  for (Index d : s) {
    if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_to_string(s));
  }
}

std::pair<Index, Index> flat_dims(const Shape& s) {
  Index cols = s.back();
  return {shape_size(s) / cols, cols};
}

}  // namespace

std::string shape_to_string(const Shape& s) {
  std::ostringstream os;
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  return os.str();
}

TensorNode::~TensorNode() {
  // Iterative teardown so long op chains cannot overflow the stack.
  std::vector<std::shared_ptr<TensorNode>> stack;
  for (auto& p : parents) {
    if (p && p.use_count() == 1) stack.push_back(std::move(p));
  }
  parents.clear();
  while (!stack.empty()) {
    auto n = std::move(stack.back());
    stack.pop_back();
    for (auto& p : n->parents) {
      if (p && p.use_count() == 1) stack.push_back(std::move(p));
    }
    n->parents.clear();
  }
}

void TensorNode::ensure_grad() {
  if (grad.rows() != value.rows() || grad.cols() != value.cols()) {
    grad = Mat::Zero(value.rows(), value.cols());
  }
}

Tensor Tensor::from_mat(const Mat& m, bool requires_grad) {
  return from_mat(m, Shape{m.rows(), m.cols()}, requires_grad);
}

Tensor Tensor::from_mat(const Mat& m, Shape shape, bool requires_grad) {
  check_shape(shape);
  auto [r, c] = flat_dims(shape);
  if (r != m.rows() || c != m.cols()) {
    throw ShapeError("storage " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                     " does not flatten to shape " + shape_to_string(shape));
  }
  auto n = std::make_shared<TensorNode>();
  n->value = m;
  n->shape = std::move(shape);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  check_shape(shape);
  auto [r, c] = flat_dims(shape);
  return from_mat(Mat::Zero(r, c), shape, requires_grad);
}

Tensor Tensor::scalar(Real v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return from_mat(m, Shape{1}, false);
}

const Mat& Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad = Mat::Zero(node_->value.rows(), node_->value.cols()); }

Real Tensor::item() const {
  if (size() != 1) throw ShapeError("item() requires a scalar tensor, got " + shape_to_string(shape()));
  return node_->value(0, 0);
}

void Tensor::backward() const {
  if (!node_) throw ShapeError("backward() on an empty tensor");
  if (size() != 1) throw ShapeError("backward() requires a scalar loss, got " + shape_to_string(shape()));
  if (!node_->requires_grad) return;

  // Iterative topological order over the requires_grad subgraph.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> done;
  std::vector<std::pair<TensorNode*, size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next == 0 && done.count(n)) {
      stack.pop_back();
      continue;
    }
    bool descended = false;
    while (next < n->parents.size()) {
      TensorNode* p = n->parents[next].get();
      ++next;
      if (p && p->requires_grad && !done.count(p)) {
        stack.emplace_back(p, 0);
        descended = true;
        break;
      }
    }
    if (!descended && next >= n->parents.size()) {
      done.insert(n);
      order.push_back(n);
      stack.pop_back();
    }
  }

  // Interior grads are reset per pass; leaf (parameter) grads accumulate.
  for (TensorNode* n : order) {
    if (!n->parents.empty()) {
      n->grad = Mat::Zero(n->value.rows(), n->value.cols());
    } else {
      n->ensure_grad();
    }
  }
  node_->grad(0, 0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

Tensor make_node(Mat value, Shape shape, std::vector<Tensor> parents,
                 std::function<void(TensorNode&)> backprop) {
  check_shape(shape);
  auto n = std::make_shared<TensorNode>();
  n->value = std::move(value);
  n->shape = std::move(shape);
  for (const auto& p : parents) {
    if (p.node()->requires_grad) n->requires_grad = true;
    n->parents.push_back(p.node());
  }
  if (n->requires_grad) n->backprop = std::move(backprop);
  return Tensor(std::move(n));
}

namespace {

void require_2d(const Tensor& t, const char* op) {
  if (t.shape().size() != 2) {
    throw ShapeError(std::string(op) + ": expected a 2-d tensor, got " + shape_to_string(t.shape()));
  }
}

void accumulate(TensorNode& parent, const Mat& g) {
  if (!parent.requires_grad) return;
  parent.ensure_grad();
  parent.grad += g;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions disagree, " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
  Mat v = a.value() * b.value();
  auto an = a.node().get();
  auto bn = b.node().get();
  return make_node(std::move(v), Shape{a.rows(), b.cols()}, {a, b}, [an, bn](TensorNode& self) {
    accumulate(*an, self.grad * bn->value.transpose());
    accumulate(*bn, an->value.transpose() * self.grad);
  });
}

Tensor transpose(const Tensor& a) {
  require_2d(a, "transpose");
  auto an = a.node().get();
  return make_node(a.value().transpose(), Shape{a.cols(), a.rows()}, {a},
                   [an](TensorNode& self) { accumulate(*an, self.grad.transpose()); });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("add: shape mismatch, " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
  auto an = a.node().get();
  auto bn = b.node().get();
  return make_node(a.value() + b.value(), a.shape(), {a, b}, [an, bn](TensorNode& self) {
    accumulate(*an, self.grad);
    accumulate(*bn, self.grad);
  });
}

Tensor add_rowvec(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("add_rowvec: expected 1x" + std::to_string(a.cols()) + " row, got " +
                     shape_to_string(row.shape()));
  }
  Mat v = a.value();
  v.rowwise() += row.value().row(0);
  auto an = a.node().get();
  auto rn = row.node().get();
  return make_node(std::move(v), a.shape(), {a, row}, [an, rn](TensorNode& self) {
    accumulate(*an, self.grad);
    accumulate(*rn, self.grad.colwise().sum());
  });
}

Tensor scale(const Tensor& a, Real k) {
  auto an = a.node().get();
  return make_node(a.value() * k, a.shape(), {a},
                   [an, k](TensorNode& self) { accumulate(*an, self.grad * k); });
}

Tensor cmul(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("cmul: shape mismatch, " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
  auto an = a.node().get();
  auto bn = b.node().get();
  return make_node(a.value().cwiseProduct(b.value()), a.shape(), {a, b},
                   [an, bn](TensorNode& self) {
                     accumulate(*an, self.grad.cwiseProduct(bn->value));
                     accumulate(*bn, self.grad.cwiseProduct(an->value));
                   });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("concat_cols: row counts disagree, " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
  Mat v(a.rows(), a.cols() + b.cols());
  v.leftCols(a.cols()) = a.value();
  v.rightCols(b.cols()) = b.value();
  auto an = a.node().get();
  auto bn = b.node().get();
  Index ac = a.cols();
  Index bc = b.cols();
  return make_node(std::move(v), Shape{a.rows(), a.cols() + b.cols()}, {a, b},
                   [an, bn, ac, bc](TensorNode& self) {
                     accumulate(*an, self.grad.leftCols(ac));
                     accumulate(*bn, self.grad.rightCols(bc));
                   });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  Index cols = parts[0].cols();
  Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) {
      throw ShapeError("concat_rows: column counts disagree, " + shape_to_string(parts[0].shape()) +
                       " vs " + shape_to_string(p.shape()));
    }
    rows += p.rows();
  }
  Mat v(rows, cols);
  Index at = 0;
  for (const auto& p : parts) {
    v.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  std::vector<TensorNode*> nodes;
  std::vector<Index> sizes;
  for (const auto& p : parts) {
    nodes.push_back(p.node().get());
    sizes.push_back(p.rows());
  }
  return make_node(std::move(v), Shape{rows, cols}, parts,
                   [nodes, sizes](TensorNode& self) {
                     Index at = 0;
                     for (size_t i = 0; i < nodes.size(); ++i) {
                       accumulate(*nodes[i], self.grad.middleRows(at, sizes[i]));
                       at += sizes[i];
                     }
                   });
}

Tensor slice_rows(const Tensor& a, Index start, Index len) {
  if (start < 0 || len <= 0 || start + len > a.rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(start) + "," + std::to_string(start + len) +
                     ") out of " + std::to_string(a.rows()) + " rows");
  }
  auto an = a.node().get();
  return make_node(a.value().middleRows(start, len), Shape{len, a.cols()}, {a},
                   [an, start, len](TensorNode& self) {
                     if (!an->requires_grad) return;
                     an->ensure_grad();
                     an->grad.middleRows(start, len) += self.grad;
                   });
}

Tensor slice_cols(const Tensor& a, Index start, Index len) {
  if (start < 0 || len <= 0 || start + len > a.cols()) {
    throw ShapeError("slice_cols: [" + std::to_string(start) + "," + std::to_string(start + len) +
                     ") out of " + std::to_string(a.cols()) + " cols");
  }
  auto an = a.node().get();
  return make_node(a.value().middleCols(start, len), Shape{a.rows(), len}, {a},
                   [an, start, len](TensorNode& self) {
                     if (!an->requires_grad) return;
                     an->ensure_grad();
                     an->grad.middleCols(start, len) += self.grad;
                   });
}

Tensor gather_rows(const Tensor& a, const std::vector<Index>& rows) {
  if (rows.empty()) throw ShapeError("gather_rows: empty index list");
  for (Index r : rows) {
    if (r < 0 || r >= a.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(r) + " out of " +
                       std::to_string(a.rows()) + " rows");
    }
  }
  Mat v(static_cast<Index>(rows.size()), a.cols());
  for (size_t i = 0; i < rows.size(); ++i) v.row(static_cast<Index>(i)) = a.value().row(rows[i]);
  auto an = a.node().get();
  auto idx = rows;
  return make_node(std::move(v), Shape{static_cast<Index>(rows.size()), a.cols()}, {a},
                   [an, idx](TensorNode& self) {
                     if (!an->requires_grad) return;
                     an->ensure_grad();
                     for (size_t i = 0; i < idx.size(); ++i) {
                       an->grad.row(idx[i]) += self.grad.row(static_cast<Index>(i));
                     }
                   });
}

Tensor reshape(const Tensor& a, const Shape& shape) {
  check_shape(shape);
  auto [r, c] = flat_dims(shape);
  if (r * c != a.size()) {
    throw ShapeError("reshape: " + shape_to_string(a.shape()) + " has " + std::to_string(a.size()) +
                     " elements, target " + shape_to_string(shape));
  }
  Mat v(r, c);
  Eigen::Map<Eigen::Matrix<Real, Eigen::Dynamic, 1>>(v.data(), v.size()) =
      Eigen::Map<const Eigen::Matrix<Real, Eigen::Dynamic, 1>>(a.value().data(), a.size());
  auto an = a.node().get();
  return make_node(std::move(v), shape, {a}, [an](TensorNode& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    Eigen::Map<Eigen::Matrix<Real, Eigen::Dynamic, 1>>(an->grad.data(), an->grad.size()) +=
        Eigen::Map<const Eigen::Matrix<Real, Eigen::Dynamic, 1>>(self.grad.data(), self.grad.size());
  });
}

Tensor sum_all(const Tensor& a) {
  Mat v(1, 1);
  v(0, 0) = a.value().sum();
  auto an = a.node().get();
  return make_node(std::move(v), Shape{1}, {a}, [an](TensorNode& self) {
    accumulate(*an, Mat::Constant(an->value.rows(), an->value.cols(), self.grad(0, 0)));
  });
}

Tensor pick_sum(const Tensor& a, const std::vector<Index>& flat_indices) {
  Real s = 0;
  for (Index i : flat_indices) {
    if (i < 0 || i >= a.size()) {
      throw ShapeError("pick_sum: flat index " + std::to_string(i) + " out of " +
                       std::to_string(a.size()) + " elements");
    }
    s += a.value()(i / a.cols(), i % a.cols());
  }
  Mat v(1, 1);
  v(0, 0) = s;
  auto an = a.node().get();
  auto idx = flat_indices;
  return make_node(std::move(v), Shape{1}, {a}, [an, idx](TensorNode& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    Real g = self.grad(0, 0);
    Index cols = an->value.cols();
    for (Index i : idx) an->grad(i / cols, i % cols) += g;
  });
}

Tensor log_clamped(const Tensor& a, Real eps) {
  Mat v = a.value().cwiseMax(eps).array().log().matrix();
  auto an = a.node().get();
  return make_node(std::move(v), a.shape(), {a}, [an, eps](TensorNode& self) {
    Mat g = (an->value.array() > eps).select(self.grad.array() / an->value.array(), 0.0).matrix();
    accumulate(*an, g);
  });
}

Tensor masked_pick_lastaxis(const Tensor& a, const std::vector<Index>& index,
                            const std::vector<bool>& keep, const Shape& out_shape) {
  if (static_cast<Index>(index.size()) != a.rows() || keep.size() != index.size()) {
    throw ShapeError("masked_pick_lastaxis: need one index and keep flag per row");
  }
  check_shape(out_shape);
  auto [r, c] = flat_dims(out_shape);
  if (r * c != a.rows()) {
    throw ShapeError("masked_pick_lastaxis: output shape " + shape_to_string(out_shape) +
                     " does not cover " + std::to_string(a.rows()) + " rows");
  }
  Mat v = Mat::Zero(r, c);
  for (Index row = 0; row < a.rows(); ++row) {
    if (!keep[row]) continue;
    Index col = index[row];
    if (col < 0 || col >= a.cols()) throw ShapeError("masked_pick_lastaxis: column index out of range");
    v(row / c, row % c) = a.value()(row, col);
  }
  auto an = a.node().get();
  auto idx = index;
  auto kp = keep;
  Index oc = c;
  return make_node(std::move(v), out_shape, {a}, [an, idx, kp, oc](TensorNode& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (size_t row = 0; row < idx.size(); ++row) {
      if (!kp[row]) continue;
      an->grad(static_cast<Index>(row), idx[row]) +=
          self.grad(static_cast<Index>(row) / oc, static_cast<Index>(row) % oc);
    }
  });
}

Tensor relu(const Tensor& a) {
  auto an = a.node().get();
  return make_node(a.value().cwiseMax(0.0), a.shape(), {a}, [an](TensorNode& self) {
    accumulate(*an, (an->value.array() > 0.0).select(self.grad.array(), 0.0).matrix());
  });
}

Tensor tanh_op(const Tensor& a) {
  Mat v = a.value().array().tanh().matrix();
  auto an = a.node().get();
  auto vn = std::make_shared<Mat>(v);
  return make_node(std::move(v), a.shape(), {a}, [an, vn](TensorNode& self) {
    accumulate(*an, (self.grad.array() * (1.0 - vn->array().square())).matrix());
  });
}

Tensor sigmoid(const Tensor& a) {
  Mat v = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  auto an = a.node().get();
  auto vn = std::make_shared<Mat>(v);
  return make_node(std::move(v), a.shape(), {a}, [an, vn](TensorNode& self) {
    accumulate(*an, (self.grad.array() * vn->array() * (1.0 - vn->array())).matrix());
  });
}

Tensor softmax_lastaxis(const Tensor& a) {
  if (a.cols() < 1) throw ShapeError("softmax: empty last axis");
  Mat v(a.rows(), a.cols());
  for (Index r = 0; r < a.rows(); ++r) {
    Real mx = a.value().row(r).maxCoeff();
    Eigen::ArrayXd e = (a.value().row(r).array() - mx).exp();
    v.row(r) = (e / e.sum()).matrix();
  }
  auto an = a.node().get();
  auto vn = std::make_shared<Mat>(v);
  return make_node(std::move(v), a.shape(), {a}, [an, vn](TensorNode& self) {
    Mat g(self.grad.rows(), self.grad.cols());
    for (Index r = 0; r < self.grad.rows(); ++r) {
      Real dot = self.grad.row(r).dot(vn->row(r));
      g.row(r) = ((self.grad.row(r).array() - dot) * vn->row(r).array()).matrix();
    }
    accumulate(*an, g);
  });
}

Tensor logsumexp_lastaxis(const Tensor& a) {
  if (a.cols() < 1) throw ShapeError("logsumexp: empty last axis");
  Mat v(a.rows(), 1);
  for (Index r = 0; r < a.rows(); ++r) {
    Real mx = a.value().row(r).maxCoeff();
    v(r, 0) = mx + std::log((a.value().row(r).array() - mx).exp().sum());
  }
  auto an = a.node().get();
  auto vn = std::make_shared<Mat>(v);
  return make_node(std::move(v), Shape{a.rows(), 1}, {a}, [an, vn](TensorNode& self) {
    Mat g(an->value.rows(), an->value.cols());
    for (Index r = 0; r < an->value.rows(); ++r) {
      g.row(r) = self.grad(r, 0) * (an->value.row(r).array() - (*vn)(r, 0)).exp().matrix();
    }
    accumulate(*an, g);
  });
}

Tensor activate(const Tensor& a, Activation kind) {
  switch (kind) {
    case Activation::relu: return relu(a);
    case Activation::tanh: return tanh_op(a);
    case Activation::sigmoid: return sigmoid(a);
    case Activation::softmax_lastaxis: return softmax_lastaxis(a);
    case Activation::logsumexp_lastaxis: return logsumexp_lastaxis(a);
  }
  throw ShapeError("unknown activation");
}

Real gradient_check(const std::function<Tensor()>& loss_fn,
                    const std::vector<Tensor>& params, Real step) {
  if (step <= 0) throw NumericError("gradient_check: step must be positive");
  for (const auto& p : params) const_cast<Tensor&>(p).zero_grad();
  Tensor loss = loss_fn();
  if (!std::isfinite(loss.item())) throw NumericError("gradient_check: non-finite loss");
  loss.backward();

  std::vector<Mat> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p.grad());

  Real worst = 0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Mat& v = const_cast<Tensor&>(params[pi]).raw_value();
    for (Index i = 0; i < v.rows(); ++i) {
      for (Index j = 0; j < v.cols(); ++j) {
        Real keep = v(i, j);
        v(i, j) = keep + step;
        Real up = loss_fn().item();
        v(i, j) = keep - step;
        Real down = loss_fn().item();
        v(i, j) = keep;
        if (!std::isfinite(up) || !std::isfinite(down)) {
          throw NumericError("gradient_check: non-finite loss during finite differences");
        }
        Real numeric = (up - down) / (2 * step);
        Real a = analytic[pi](i, j);
        Real denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(a - numeric) / denom);
      }
    }
  }
  return worst;
}

Mat uniform_init(Index rows, Index cols, Index fan_in, std::mt19937_64& rng) {
  Real bound = std::sqrt(1.0 / static_cast<Real>(fan_in));
  std::uniform_real_distribution<Real> dist(-bound, bound);
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  }
  return m;
}

}  // namespace nester
