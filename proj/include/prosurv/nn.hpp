#pragma once

// Parameter storage and the small set of layers shared by the encoders,
// translation modules and fusion head.

#include "prosurv/autograd.hpp"

#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace prosurv::nn {

using ad::Matrix;
using ad::Var;
using Rng = std::mt19937_64;

struct NamedParam {
  std::string name;
  Var var;
};

// Owns every trainable leaf of a model in registration order. Names are
// unique and stable; checkpoints key tensors by them.
class ParamStore {
 public:
  Var add(std::string name, Matrix init);

  const std::vector<NamedParam>& params() const { return params_; }
  const Var* find(std::string_view name) const;
  std::size_t total_size() const;

  void zero_grad();
  std::vector<Matrix> snapshot() const;
  void restore(const std::vector<Matrix>& values);

 private:
  std::vector<NamedParam> params_;
};

enum class Init {
  kUniformFanIn,  // U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases
  kLecunNormal,   // N(0, 1/fan_in) weights, zero bias
};

struct Linear {
  Var weight;  // in x out
  Var bias;    // 1 x out, undefined when the layer has no bias

  Var forward(const Var& x) const;
  Eigen::Index in_features() const { return weight.rows(); }
  Eigen::Index out_features() const { return weight.cols(); }
};

Linear make_linear(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index out, bool bias,
                   Init init, Rng& rng);

struct LayerNorm {
  Var gamma;
  Var beta;

  Var forward(const Var& x) const { return ad::layer_norm_rows(x, gamma, beta); }
};

LayerNorm make_layer_norm(ParamStore& store, const std::string& name, Eigen::Index width);

// Stochastic layers draw from `rng` only when `training` is set.
struct ForwardMode {
  bool training = false;
  Rng* rng = nullptr;
};

/// Alpha dropout: keeps the self-normalizing mean/variance of SELU outputs.
Var alpha_dropout(const Var& x, double drop_prob, const ForwardMode& mode);

}  // namespace prosurv::nn
