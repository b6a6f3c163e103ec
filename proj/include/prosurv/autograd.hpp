#pragma once

// Minimal reverse-mode automatic differentiation over dense double matrices.
//
// A Var is a handle to a graph node. Operations record their inputs and a
// backward closure only when at least one input requires a gradient, so
// inference through the same code path builds no graph.

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <vector>

namespace prosurv::ad {

using Matrix = Eigen::MatrixXd;

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  // Set on leaves when a backward pass deposited a gradient into them.
  bool touched = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  void accumulate(const Matrix& g);
};

class Var {
 public:
  Var() = default;
  explicit Var(Matrix value, bool requires_grad = false);

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool touched() const { return node_ && node_->touched; }
  bool defined() const { return static_cast<bool>(node_); }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double scalar() const;

  void zero_grad();

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// While alive, ops on the current thread record no graph (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

/// Leaf that takes part in gradient computation.
Var parameter(Matrix value);
/// Leaf with no gradient.
Var constant(Matrix value);
Var scalar_constant(double v);

/// Builds an op node. `backward` receives the finished node, whose `grad`
/// holds dL/d(output), and must push gradients into `node.inputs`.
Var make_op(Matrix value, std::vector<Var> inputs, std::function<void(Node&)> backward);

/// Seeds d(root)/d(root) = 1 and runs the recorded closures in reverse
/// topological order. `root` must be 1x1.
void backward(const Var& root);

// Linear algebra.
Var matmul(const Var& a, const Var& b);
/// a * b^T
Var matmul_nt(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
/// Adds a 1 x cols row vector to every row of `a`.
Var add_row(const Var& a, const Var& row);
Var scale(const Var& a, double s);
Var hadamard(const Var& a, const Var& b);
/// scale .* a + offset, with constant per-entry scale and offset.
Var affine_const(const Var& a, const Matrix& scale, const Matrix& offset);
Var detach(const Var& a);

// Shape.
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
/// Column-wise mean over rows: N x d -> 1 x d.
Var mean_rows(const Var& a);

// Elementwise nonlinearities.
Var sigmoid(const Var& a);
Var gelu(const Var& a);
Var selu(const Var& a);

// Row-wise transforms.
Var softmax_rows(const Var& a);
Var layer_norm_rows(const Var& a, const Var& gamma, const Var& beta, double eps = 1e-5);
/// Per-row min-max rescale: (x - min) / (max - min + eps).
Var minmax_normalize_rows(const Var& a, double eps);
/// Cosine similarity between a single row `q` (1 x d) and every row of `rows`
/// (R x d), with eps added to each Euclidean norm. Output is 1 x R.
Var cosine_rows(const Var& q, const Var& rows, double eps);

// Reductions to 1x1.
Var sum(const Var& a);
/// sum(a .* weights) for a constant weight matrix of the same shape.
Var weighted_sum(const Var& a, const Matrix& weights);
Var squared_distance(const Var& a, const Var& b);

}  // namespace prosurv::ad
