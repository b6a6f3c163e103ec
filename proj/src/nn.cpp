#include "prosurv/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace prosurv::nn {

Var ParamStore::add(std::string name, Matrix init) {
  if (find(name) != nullptr) throw std::logic_error("duplicate parameter name: " + name);
  Var v = ad::parameter(std::move(init));
  params_.push_back({std::move(name), v});
  return v;
}

const Var* ParamStore::find(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p.var;
  }
  return nullptr;
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.var.value().size());
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

std::vector<Matrix> ParamStore::snapshot() const {
  std::vector<Matrix> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.var.value());
  return out;
}

void ParamStore::restore(const std::vector<Matrix>& values) {
  if (values.size() != params_.size()) throw std::invalid_argument("restore: parameter count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto& v = params_[i].var.mutable_value();
    if (v.rows() != values[i].rows() || v.cols() != values[i].cols()) {
      throw std::invalid_argument("restore: shape mismatch for " + params_[i].name);
    }
    v = values[i];
  }
}

Var Linear::forward(const Var& x) const {
  Var y = ad::matmul(x, weight);
  return bias.defined() ? ad::add_row(y, bias) : y;
}

Linear make_linear(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index out, bool bias,
                   Init init, Rng& rng) {
  const double fan_in = static_cast<double>(in);
  Matrix w(in, out);
  Matrix b = Matrix::Zero(1, out);
  if (init == Init::kUniformFanIn) {
    std::uniform_real_distribution<double> u(-1.0 / std::sqrt(fan_in), 1.0 / std::sqrt(fan_in));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = u(rng);
  } else {
    std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(fan_in));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = g(rng);
  }
  Linear layer;
  layer.weight = store.add(name + ".weight", std::move(w));
  if (bias) layer.bias = store.add(name + ".bias", std::move(b));
  return layer;
}

LayerNorm make_layer_norm(ParamStore& store, const std::string& name, Eigen::Index width) {
  return {store.add(name + ".gamma", Matrix::Ones(1, width)), store.add(name + ".beta", Matrix::Zero(1, width))};
}

Var alpha_dropout(const Var& x, double drop_prob, const ForwardMode& mode) {
  if (!mode.training || drop_prob <= 0.0) return x;
  if (mode.rng == nullptr) throw std::logic_error("alpha_dropout: training mode without rng");
  constexpr double kAlphaPrime = -1.7580993408473766;  // -selu_scale * selu_alpha
  const double keep = 1.0 - drop_prob;
  const double a = 1.0 / std::sqrt(keep + kAlphaPrime * kAlphaPrime * keep * drop_prob);
  const double b = -a * kAlphaPrime * drop_prob;
  std::bernoulli_distribution keep_dist(keep);
  Matrix s(x.rows(), x.cols());
  Matrix off(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const bool kept = keep_dist(*mode.rng);
    s.data()[i] = kept ? a : 0.0;
    off.data()[i] = kept ? b : a * kAlphaPrime + b;
  }
  return ad::affine_const(x, s, off);
}

}  // namespace prosurv::nn
