#include "prosurv/translation.hpp"

#include "prosurv/errors.hpp"

#include <cmath>

namespace prosurv::translation {

std::string to_string(Direction d) { return d == Direction::kPathToGene ? "p2g" : "g2p"; }

TranslationParams make_translation(nn::ParamStore& store, Direction direction, int d, double temperature,
                                   nn::Rng& rng) {
  if (!(temperature > 0.0)) throw UsageError("translation: temperature must be positive");
  const std::string name = "translate." + to_string(direction);
  TranslationParams p;
  p.direction = direction;
  p.temperature = temperature;
  p.query = nn::make_linear(store, name + ".query", d, d, false, nn::Init::kUniformFanIn, rng).weight;
  p.key = nn::make_linear(store, name + ".key", d, d, false, nn::Init::kUniformFanIn, rng).weight;
  p.value = nn::make_linear(store, name + ".value", d, d, false, nn::Init::kUniformFanIn, rng).weight;
  return p;
}

Translated translate(const Var& feature, const Var& target_bank_rows, const TranslationParams& params) {
  const Eigen::Index d = params.query.rows();
  if (feature.rows() != 1 || feature.cols() != d) throw UsageError("translate: feature must be 1 x d");
  if (target_bank_rows.cols() != d) throw UsageError("translate: bank width does not match d");
  if (!(params.temperature > 0.0)) throw UsageError("translate: temperature must be positive");

  const Var q = ad::matmul(feature, params.query);
  const Var k = ad::matmul(target_bank_rows, params.key);
  const Var v = ad::matmul(target_bank_rows, params.value);
  const double inv = 1.0 / (params.temperature * std::sqrt(static_cast<double>(d)));
  Var attention = ad::softmax_rows(ad::scale(ad::matmul_nt(q, k), inv));
  Var out = ad::matmul(attention, v);
  return {std::move(out), std::move(attention)};
}

Var alignment_loss(const Var& original, const Var& translated) { return ad::squared_distance(original, translated); }

double alignment_loss(const Eigen::RowVectorXd& original, const Eigen::RowVectorXd& translated) {
  if (original.size() != translated.size()) throw UsageError("alignment_loss: width mismatch");
  return (original - translated).squaredNorm();
}

}  // namespace prosurv::translation
