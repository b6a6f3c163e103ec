#pragma once

// Prototype-guided cross-modal translation: a single-head cross-attention
// where the source modality's feature is the query and the TARGET modality's
// prototype bank supplies keys and values. The softmax runs over all K*n
// prototype rows.

#include "prosurv/autograd.hpp"
#include "prosurv/nn.hpp"

#include <string>

namespace prosurv::translation {

using ad::Matrix;
using ad::Var;

enum class Direction { kPathToGene, kGeneToPath };

std::string to_string(Direction d);

struct TranslationParams {
  Direction direction = Direction::kPathToGene;
  Var query;  // d x d, no bias
  Var key;    // d x d
  Var value;  // d x d
  double temperature = 0.5;
};

TranslationParams make_translation(nn::ParamStore& store, Direction direction, int d, double temperature,
                                   nn::Rng& rng);

struct Translated {
  Var feature;    // 1 x d
  Var attention;  // 1 x (K*n), rows sum to one
};

/// softmax((f Wq)(B Wk)^T / (tau sqrt(d))) (B Wv).
Translated translate(const Var& feature, const Var& target_bank_rows, const TranslationParams& params);

/// Squared Euclidean distance ||original - translated||^2.
Var alignment_loss(const Var& original, const Var& translated);
double alignment_loss(const Eigen::RowVectorXd& original, const Eigen::RowVectorXd& translated);

}  // namespace prosurv::translation
