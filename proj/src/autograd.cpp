#include "prosurv/autograd.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <unordered_set>

namespace prosurv::ad {

namespace {

constexpr double kSeluAlpha = 1.6732632423543772848170429916717;
constexpr double kSeluScale = 1.0507009873554804934193349852946;

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
}

Node& in(Node& n, std::size_t i) { return *n.inputs[i]; }

thread_local bool g_grad_enabled = true;

}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

void Node::accumulate(const Matrix& g) {
  if (!requires_grad) return;
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
  if (inputs.empty()) touched = true;
}

Var::Var(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

double Var::scalar() const {
  if (node_->value.size() != 1) throw std::logic_error("Var::scalar on non-scalar");
  return node_->value(0, 0);
}

void Var::zero_grad() {
  node_->grad.resize(0, 0);
  node_->touched = false;
}

Var parameter(Matrix value) { return Var(std::move(value), true); }
Var constant(Matrix value) { return Var(std::move(value), false); }
Var scalar_constant(double v) { return Var(Matrix::Constant(1, 1, v), false); }

Var make_op(Matrix value, std::vector<Var> inputs, std::function<void(Node&)> backward) {
  bool any = false;
  if (g_grad_enabled) {
    for (const auto& v : inputs) any = any || v.requires_grad();
  }
  Var out(std::move(value), any);
  if (any) {
    auto& node = *out.node();
    node.inputs.reserve(inputs.size());
    for (auto& v : inputs) node.inputs.push_back(v.node());
    node.backward_fn = std::move(backward);
  }
  return out;
}

void backward(const Var& root) {
  if (root.value().size() != 1) throw std::logic_error("backward: root must be scalar");
  if (!root.requires_grad()) return;

  // Iterative post-order DFS for a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.size() != 0) n->backward_fn(*n);
  }
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  return make_op(a.value() * b.value(), {a, b}, [](Node& n) {
    Node& x = in(n, 0);
    Node& y = in(n, 1);
    if (x.requires_grad) x.accumulate(n.grad * y.value.transpose());
    if (y.requires_grad) y.accumulate(x.value.transpose() * n.grad);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: inner dimension mismatch");
  return make_op(a.value() * b.value().transpose(), {a, b}, [](Node& n) {
    Node& x = in(n, 0);
    Node& y = in(n, 1);
    if (x.requires_grad) x.accumulate(n.grad * y.value);
    if (y.requires_grad) y.accumulate(n.grad.transpose() * x.value);
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  return make_op(a.value() + b.value(), {a, b}, [](Node& n) {
    in(n, 0).accumulate(n.grad);
    in(n, 1).accumulate(n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "sub");
  return make_op(a.value() - b.value(), {a, b}, [](Node& n) {
    in(n, 0).accumulate(n.grad);
    in(n, 1).accumulate(-n.grad);
  });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: shape mismatch");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return make_op(std::move(out), {a, row}, [](Node& n) {
    in(n, 0).accumulate(n.grad);
    in(n, 1).accumulate(n.grad.colwise().sum());
  });
}

Var scale(const Var& a, double s) {
  return make_op(a.value() * s, {a}, [s](Node& n) { in(n, 0).accumulate(n.grad * s); });
}

Var hadamard(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "hadamard");
  return make_op(a.value().cwiseProduct(b.value()), {a, b}, [](Node& n) {
    Node& x = in(n, 0);
    Node& y = in(n, 1);
    if (x.requires_grad) x.accumulate(n.grad.cwiseProduct(y.value));
    if (y.requires_grad) y.accumulate(n.grad.cwiseProduct(x.value));
  });
}

Var affine_const(const Var& a, const Matrix& s, const Matrix& offset) {
  require_same_shape(a.value(), s, "affine_const");
  require_same_shape(a.value(), offset, "affine_const");
  return make_op(a.value().cwiseProduct(s) + offset, {a},
                 [s](Node& n) { in(n, 0).accumulate(n.grad.cwiseProduct(s)); });
}

Var detach(const Var& a) { return constant(a.value()); }

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    offsets.push_back(at);
    at += p.cols();
  }
  return make_op(std::move(out), parts, [offsets](Node& n) {
    for (std::size_t i = 0; i < n.inputs.size(); ++i) {
      Node& x = in(n, i);
      if (x.requires_grad) x.accumulate(n.grad.middleCols(offsets[i], x.value.cols()));
    }
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw std::invalid_argument("slice_cols: out of range");
  return make_op(a.value().middleCols(start, count), {a}, [start, count](Node& n) {
    Node& x = in(n, 0);
    Matrix g = Matrix::Zero(x.value.rows(), x.value.cols());
    g.middleCols(start, count) = n.grad;
    x.accumulate(g);
  });
}

Var mean_rows(const Var& a) {
  if (a.rows() == 0) throw std::invalid_argument("mean_rows: empty input");
  const double inv = 1.0 / static_cast<double>(a.rows());
  return make_op(a.value().colwise().mean(), {a}, [inv](Node& n) {
    Node& x = in(n, 0);
    x.accumulate(n.grad.replicate(x.value.rows(), 1) * inv);
  });
}

Var sigmoid(const Var& a) {
  Matrix y = a.value().unaryExpr([](double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
  return make_op(y, {a}, [](Node& n) {
    const Matrix& y = n.value;
    in(n, 0).accumulate(n.grad.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
  });
}

Var gelu(const Var& a) {
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  Matrix y = a.value().unaryExpr([inv_sqrt2](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); });
  return make_op(std::move(y), {a}, [inv_sqrt2](Node& n) {
    Node& x = in(n, 0);
    const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
    Matrix d = x.value.unaryExpr([&](double v) {
      return 0.5 * (1.0 + std::erf(v * inv_sqrt2)) + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
    });
    x.accumulate(n.grad.cwiseProduct(d));
  });
}

Var selu(const Var& a) {
  Matrix y = a.value().unaryExpr(
      [](double v) { return v > 0 ? kSeluScale * v : kSeluScale * kSeluAlpha * (std::exp(v) - 1.0); });
  return make_op(std::move(y), {a}, [](Node& n) {
    Node& x = in(n, 0);
    Matrix d = x.value.unaryExpr([](double v) { return v > 0 ? kSeluScale : kSeluScale * kSeluAlpha * std::exp(v); });
    x.accumulate(n.grad.cwiseProduct(d));
  });
}

Var softmax_rows(const Var& a) {
  Matrix y = a.value();
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    const double m = y.row(r).maxCoeff();
    y.row(r) = (y.row(r).array() - m).exp();
    y.row(r) /= y.row(r).sum();
  }
  return make_op(std::move(y), {a}, [](Node& n) {
    const Matrix& y = n.value;
    Eigen::VectorXd dots = n.grad.cwiseProduct(y).rowwise().sum();
    Matrix g = y.cwiseProduct((n.grad.colwise() - dots));
    in(n, 0).accumulate(g);
  });
}

Var layer_norm_rows(const Var& a, const Var& gamma, const Var& beta, double eps) {
  const Eigen::Index d = a.cols();
  if (gamma.rows() != 1 || gamma.cols() != d || beta.rows() != 1 || beta.cols() != d) {
    throw std::invalid_argument("layer_norm_rows: gamma/beta shape mismatch");
  }
  const Matrix& x = a.value();
  Matrix xhat(x.rows(), d);
  Eigen::VectorXd inv_sigma(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    inv_sigma(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x.row(r).array() - mu) * inv_sigma(r);
  }
  Matrix y = (xhat.array().rowwise() * gamma.value().row(0).array()).matrix();
  y.rowwise() += beta.value().row(0);
  return make_op(std::move(y), {a, gamma, beta}, [xhat, inv_sigma](Node& n) {
    Node& x_in = in(n, 0);
    Node& g_in = in(n, 1);
    Node& b_in = in(n, 2);
    if (g_in.requires_grad) g_in.accumulate(n.grad.cwiseProduct(xhat).colwise().sum());
    if (b_in.requires_grad) b_in.accumulate(n.grad.colwise().sum());
    if (x_in.requires_grad) {
      Matrix dxhat = (n.grad.array().rowwise() * g_in.value.row(0).array()).matrix();
      Matrix dx(dxhat.rows(), dxhat.cols());
      for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
        const double m1 = dxhat.row(r).mean();
        const double m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
        dx.row(r) = inv_sigma(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
      }
      x_in.accumulate(dx);
    }
  });
}

Var minmax_normalize_rows(const Var& a, double eps) {
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  std::vector<Eigen::Index> argmin(x.rows()), argmax(x.rows());
  Eigen::VectorXd denom(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double lo = x.row(r).minCoeff(&argmin[r]);
    const double hi = x.row(r).maxCoeff(&argmax[r]);
    denom(r) = hi - lo + eps;
    y.row(r) = (x.row(r).array() - lo) / denom(r);
  }
  return make_op(y, {a}, [argmin, argmax, denom](Node& n) {
    const Matrix& y = n.value;
    Matrix g(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double inv = 1.0 / denom(r);
      g.row(r) = n.grad.row(r) * inv;
      const double gsum = n.grad.row(r).sum();
      const double gy = n.grad.row(r).dot(y.row(r));
      // y_i = (x_i - lo) / (hi - lo + eps)
      g(r, argmin[r]) += -gsum * inv + gy * inv;
      g(r, argmax[r]) += -gy * inv;
    }
    in(n, 0).accumulate(g);
  });
}

Var cosine_rows(const Var& q, const Var& rows, double eps) {
  if (q.rows() != 1 || q.cols() != rows.cols()) throw std::invalid_argument("cosine_rows: shape mismatch");
  const Eigen::RowVectorXd qv = q.value().row(0);
  const Matrix& b = rows.value();
  const double qnorm = qv.norm();
  const double na = qnorm + eps;
  Eigen::VectorXd bnorm = b.rowwise().norm();
  Eigen::VectorXd nb = bnorm.array() + eps;
  Eigen::VectorXd dots = b * qv.transpose();
  Matrix out(1, b.rows());
  for (Eigen::Index r = 0; r < b.rows(); ++r) out(0, r) = dots(r) / (na * nb(r));
  return make_op(std::move(out), {q, rows}, [qnorm, na, bnorm, nb, dots](Node& n) {
    Node& q_in = in(n, 0);
    Node& b_in = in(n, 1);
    const Eigen::RowVectorXd qv = q_in.value.row(0);
    const Matrix& b = b_in.value;
    if (q_in.requires_grad) {
      Eigen::RowVectorXd gq = Eigen::RowVectorXd::Zero(qv.size());
      for (Eigen::Index r = 0; r < b.rows(); ++r) {
        const double g = n.grad(0, r);
        gq += g * b.row(r) / (na * nb(r));
        if (qnorm > 0) gq -= g * dots(r) / (na * na * nb(r)) * qv / qnorm;
      }
      q_in.accumulate(gq);
    }
    if (b_in.requires_grad) {
      Matrix gb(b.rows(), b.cols());
      for (Eigen::Index r = 0; r < b.rows(); ++r) {
        const double g = n.grad(0, r);
        gb.row(r) = g * qv / (na * nb(r));
        if (bnorm(r) > 0) gb.row(r) -= g * dots(r) / (na * nb(r) * nb(r)) * b.row(r) / bnorm(r);
      }
      b_in.accumulate(gb);
    }
  });
}

Var sum(const Var& a) {
  return make_op(Matrix::Constant(1, 1, a.value().sum()), {a}, [](Node& n) {
    Node& x = in(n, 0);
    x.accumulate(Matrix::Constant(x.value.rows(), x.value.cols(), n.grad(0, 0)));
  });
}

Var weighted_sum(const Var& a, const Matrix& weights) {
  require_same_shape(a.value(), weights, "weighted_sum");
  return make_op(Matrix::Constant(1, 1, a.value().cwiseProduct(weights).sum()), {a},
                 [weights](Node& n) { in(n, 0).accumulate(weights * n.grad(0, 0)); });
}

Var squared_distance(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "squared_distance");
  Matrix diff = a.value() - b.value();
  return make_op(Matrix::Constant(1, 1, diff.squaredNorm()), {a, b}, [diff](Node& n) {
    const double g = n.grad(0, 0);
    in(n, 0).accumulate(2.0 * g * diff);
    in(n, 1).accumulate(-2.0 * g * diff);
  });
}

}  // namespace prosurv::ad
