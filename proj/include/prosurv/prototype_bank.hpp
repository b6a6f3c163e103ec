#pragma once

// Modality-specific prototype banks and the event-aware risk contrastive
// loss that shapes them.
//
// A bank of K bins x n prototypes x d features is stored as a (K*n) x d
// matrix; rows [k*n, (k+1)*n) belong to bin k.

#include "prosurv/autograd.hpp"
#include "prosurv/nn.hpp"
#include "prosurv/survival.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>

namespace prosurv::prototypes {

using ad::Matrix;
using ad::Var;

enum class Modality { kPathology, kGenomics };

std::string to_string(Modality m);

inline constexpr double kNormEps = 1e-8;

/// i.i.d. N(0, 1/d) entries, deterministic in `seed`.
Matrix init_bank(int bins, int per_bin, int d, std::uint64_t seed);

struct PrototypeBank {
  Modality modality = Modality::kPathology;
  int bins = 0;
  int per_bin = 0;
  Var rows;  // (bins * per_bin) x d, trainable

  int dim() const { return static_cast<int>(rows.cols()); }
};

PrototypeBank make_bank(nn::ParamStore& store, Modality modality, int bins, int per_bin, int d, std::uint64_t seed);

/// Entry k is the mean cosine similarity between min-max normalized `feature`
/// (1 x d) and the min-max normalized prototypes of bin k. Output is 1 x K.
Var bin_similarity(const Var& feature, const Var& bank_rows, int bins, int per_bin);
Var bin_similarity(const Var& feature, const PrototypeBank& bank);

/// Linear coefficients c such that the contrastive loss equals c . w.
/// Uncensored: -1 on the event bin, 1/(K-1) elsewhere. Censored at bin b:
/// -1/(K-b) on bins >= b, 1/b on bins < b (absent when b = 0).
Eigen::RowVectorXd contrastive_coefficients(const survival::SurvivalLabel& label, int bins);

double risk_contrastive_loss(std::span<const double> similarity, const survival::SurvivalLabel& label);
Var risk_contrastive_loss(const Var& similarity, const survival::SurvivalLabel& label);

/// Sum over the modalities that are present; at least one must be.
double combined_sim_loss(std::optional<double> pathology, std::optional<double> genomics);
Var combined_sim_loss(const std::optional<Var>& pathology, const std::optional<Var>& genomics);

}  // namespace prosurv::prototypes
