#pragma once

// Scenario-routed survival network.
//
//   Complete:       hazards = sigmoid(FC([(F_p + F_g2p)/2, (F_g + F_p2g)/2]))
//   PathologyOnly:  hazards = sigmoid(FC([F_p, F_p2g]))
//   GenomicsOnly:   hazards = sigmoid(FC([F_g2p, F_g]))
//
// The head's first d inputs always hold a pathology-space feature and the
// last d a genomics-space feature, so a head trained on one scenario reads
// every scenario consistently.
// Bin similarities are computed on the original (pre-fusion) features.

#include "prosurv/encoders.hpp"
#include "prosurv/nn.hpp"
#include "prosurv/prototype_bank.hpp"
#include "prosurv/survival.hpp"
#include "prosurv/translation.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace prosurv::model {

using ad::Matrix;
using ad::Var;

enum class Scenario { kComplete, kPathologyOnly, kGenomicsOnly };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);
/// Throws DataError("empty sample") when neither modality is present.
Scenario scenario_of(bool has_pathology, bool has_genomics);

struct ModelConfig {
  encoders::EncoderConfig encoder;
  int bins = 4;
  int prototypes_per_bin = 32;
  double temperature = 0.5;
  // Stops gradients from the translation path into the banks.
  bool detach_bank_in_translation = false;
  std::uint64_t seed = 1;
};

struct ForwardOutput {
  Scenario scenario = Scenario::kComplete;
  Var hazards;  // 1 x K
  std::optional<Var> f_p, f_g;
  std::optional<Var> f_p2g, f_g2p;
  std::optional<Var> sim_p, sim_g;
  std::optional<Var> enhanced_p, enhanced_g;  // Complete only
};

struct LossWeights {
  double alpha = 0.2;
  double beta = 0.2;
};

struct LossBreakdown {
  Var total;
  double surv = 0.0;
  double sim = 0.0;    // combined L_sim, unweighted
  double align = 0.0;  // combined L_align, unweighted
  // Number of per-modality terms that were evaluated.
  int sim_terms = 0;
  int align_terms = 0;
};

/// Autograd wrapper around survival::nll_loss.
Var nll_loss(const Var& hazards, const survival::SurvivalLabel& label);

LossBreakdown total_loss(const ForwardOutput& out, const survival::SurvivalLabel& label, const LossWeights& weights);

class ProSurvModel {
 public:
  explicit ProSurvModel(const ModelConfig& cfg);
  ProSurvModel(const ProSurvModel&) = delete;
  ProSurvModel& operator=(const ProSurvModel&) = delete;

  /// `patches` is N x d_in, `genes` is 1 x M. Either may be absent, not both.
  ForwardOutput forward(const std::optional<Var>& patches, const std::optional<Var>& genes,
                        const nn::ForwardMode& mode = {}) const;

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }

  const prototypes::PrototypeBank& pathology_bank() const { return bank_p_; }
  const prototypes::PrototypeBank& genomics_bank() const { return bank_g_; }
  const translation::TranslationParams& path_to_gene() const { return p2g_; }
  const translation::TranslationParams& gene_to_path() const { return g2p_; }
  const nn::Linear& head() const { return head_; }

 private:
  Var head_forward(const Var& left, const Var& right) const;

  ModelConfig cfg_;
  nn::ParamStore store_;
  nn::Rng rng_;
  encoders::PathologyEncoder path_encoder_;
  encoders::GenomicEncoder gene_encoder_;
  prototypes::PrototypeBank bank_p_;
  prototypes::PrototypeBank bank_g_;
  translation::TranslationParams p2g_;
  translation::TranslationParams g2p_;
  nn::Linear head_;
};

}  // namespace prosurv::model
