#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace nester {

using Real = double;
using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;
using Shape = std::vector<Index>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string shape_to_string(const Shape& s);

/// Node of the recorded computation graph. Values are stored flattened to a
/// (prod(shape)/last_dim) x last_dim row-major matrix, so axis-wise ops
/// (softmax, logsumexp) always act on the last axis.
struct TensorNode {
  Mat value;
  Mat grad;
  Shape shape;
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backprop;

  ~TensorNode();
  void ensure_grad();
};

/// Value-semantics handle to a graph node. Tensors are immutable once
/// produced by an op; only optimizers touch parameter storage between steps.
class Tensor {
 public:
  Tensor() = default;

  static Tensor from_mat(const Mat& m, bool requires_grad = false);
  static Tensor from_mat(const Mat& m, Shape shape, bool requires_grad = false);
  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor scalar(Real v);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  Index size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  const Mat& value() const { return node_->value; }
  /// Parameter storage; mutating a tensor that is part of a live graph is
  /// outside the contract.
  Mat& raw_value() { return node_->value; }
  const Mat& grad() const;
  void zero_grad();

  Real item() const;

  /// Reverse-mode pass from this scalar. Gradients of leaf tensors
  /// accumulate across calls; interior nodes are reset per call.
  void backward() const;

  std::shared_ptr<TensorNode> node() const { return node_; }
  explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<TensorNode> node_;
};

Tensor make_node(Mat value, Shape shape, std::vector<Tensor> parents,
                 std::function<void(TensorNode&)> backprop);

// -- arithmetic ---------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
/// Adds a 1 x C row vector to every row of a.
Tensor add_rowvec(const Tensor& a, const Tensor& row);
Tensor scale(const Tensor& a, Real k);
Tensor cmul(const Tensor& a, const Tensor& b);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, Index start, Index len);
Tensor slice_cols(const Tensor& a, Index start, Index len);
Tensor gather_rows(const Tensor& a, const std::vector<Index>& rows);
Tensor reshape(const Tensor& a, const Shape& shape);
Tensor sum_all(const Tensor& a);
/// Sum of entries at the given row-major flat indices (duplicates count).
Tensor pick_sum(const Tensor& a, const std::vector<Index>& flat_indices);
Tensor log_clamped(const Tensor& a, Real eps);
/// out[r] = a(r, index[r]) where keep[r], else 0; reshaped to out_shape.
Tensor masked_pick_lastaxis(const Tensor& a, const std::vector<Index>& index,
                            const std::vector<bool>& keep, const Shape& out_shape);

// -- activations --------------------------------------------------------

enum class Activation { relu, tanh, sigmoid, softmax_lastaxis, logsumexp_lastaxis };

Tensor relu(const Tensor& a);
Tensor tanh_op(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softmax_lastaxis(const Tensor& a);
/// Per-row log-sum-exp; output has one column.
Tensor logsumexp_lastaxis(const Tensor& a);
Tensor activate(const Tensor& a, Activation kind);

// -- validation ---------------------------------------------------------

/// Compares analytic gradients of loss_fn against central finite
/// differences at the given step; returns the worst relative error with
/// denominator max(|analytic|, |numeric|, 1e-8).
Real gradient_check(const std::function<Tensor()>& loss_fn,
                    const std::vector<Tensor>& params, Real step);

/// Seeded uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) init.
Mat uniform_init(Index rows, Index cols, Index fan_in, std::mt19937_64& rng);

}  // namespace nester
