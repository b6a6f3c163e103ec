#include "prosurv/prototype_bank.hpp"

#include "prosurv/errors.hpp"

#include <cmath>
#include <random>

namespace prosurv::prototypes {

std::string to_string(Modality m) { return m == Modality::kPathology ? "pathology" : "genomics"; }

Matrix init_bank(int bins, int per_bin, int d, std::uint64_t seed) {
  if (bins < 2 || per_bin < 1 || d < 1) {
    throw UsageError("init_bank: require K >= 2, n >= 1, d >= 1 (got K=" + std::to_string(bins) +
                     ", n=" + std::to_string(per_bin) + ", d=" + std::to_string(d) + ")");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
  Matrix m(static_cast<Eigen::Index>(bins) * per_bin, d);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = dist(rng);
  }
  return m;
}

PrototypeBank make_bank(nn::ParamStore& store, Modality modality, int bins, int per_bin, int d, std::uint64_t seed) {
  PrototypeBank bank;
  bank.modality = modality;
  bank.bins = bins;
  bank.per_bin = per_bin;
  bank.rows = store.add("bank." + to_string(modality), init_bank(bins, per_bin, d, seed));
  return bank;
}

Var bin_similarity(const Var& feature, const Var& bank_rows, int bins, int per_bin) {
  if (bank_rows.rows() != static_cast<Eigen::Index>(bins) * per_bin) {
    throw UsageError("bin_similarity: bank has " + std::to_string(bank_rows.rows()) + " rows, expected K*n");
  }
  if (feature.rows() != 1 || feature.cols() != bank_rows.cols()) {
    throw UsageError("bin_similarity: feature width does not match bank");
  }
  const Var f = ad::minmax_normalize_rows(feature, kNormEps);
  const Var b = ad::minmax_normalize_rows(bank_rows, kNormEps);
  const Var cos = ad::cosine_rows(f, b, kNormEps);
  Matrix pool = Matrix::Zero(bank_rows.rows(), bins);
  for (int k = 0; k < bins; ++k) pool.block(static_cast<Eigen::Index>(k) * per_bin, k, per_bin, 1).setConstant(1.0 / per_bin);
  return ad::matmul(cos, ad::constant(std::move(pool)));
}

Var bin_similarity(const Var& feature, const PrototypeBank& bank) {
  return bin_similarity(feature, bank.rows, bank.bins, bank.per_bin);
}

Eigen::RowVectorXd contrastive_coefficients(const survival::SurvivalLabel& label, int bins) {
  survival::validate_label(label, bins);
  Eigen::RowVectorXd c(bins);
  const int b = label.bin;
  if (label.censorship == 0) {
    c.setConstant(1.0 / (bins - 1));
    c(b) = -1.0;
  } else {
    for (int k = 0; k < bins; ++k) c(k) = k >= b ? -1.0 / (bins - b) : 1.0 / b;
  }
  return c;
}

double risk_contrastive_loss(std::span<const double> similarity, const survival::SurvivalLabel& label) {
  const auto c = contrastive_coefficients(label, static_cast<int>(similarity.size()));
  double loss = 0.0;
  for (std::size_t k = 0; k < similarity.size(); ++k) loss += c(static_cast<Eigen::Index>(k)) * similarity[k];
  return loss;
}

Var risk_contrastive_loss(const Var& similarity, const survival::SurvivalLabel& label) {
  if (similarity.rows() != 1) throw UsageError("risk_contrastive_loss: similarity must be 1 x K");
  return ad::weighted_sum(similarity, contrastive_coefficients(label, static_cast<int>(similarity.cols())));
}

double combined_sim_loss(std::optional<double> pathology, std::optional<double> genomics) {
  if (!pathology && !genomics) throw UsageError("combined_sim_loss: no modality present");
  return pathology.value_or(0.0) + genomics.value_or(0.0);
}

Var combined_sim_loss(const std::optional<Var>& pathology, const std::optional<Var>& genomics) {
  if (!pathology && !genomics) throw UsageError("combined_sim_loss: no modality present");
  if (pathology && genomics) return ad::add(*pathology, *genomics);
  return pathology ? *pathology : *genomics;
}

}  // namespace prosurv::prototypes
