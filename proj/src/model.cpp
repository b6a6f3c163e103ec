#include "prosurv/model.hpp"

#include "prosurv/errors.hpp"

#include <vector>

namespace prosurv::model {

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::kComplete:
      return "complete";
    case Scenario::kPathologyOnly:
      return "pathology";
    case Scenario::kGenomicsOnly:
      return "genomics";
  }
  return "unknown";
}

Scenario scenario_from_string(const std::string& s) {
  if (s == "complete") return Scenario::kComplete;
  if (s == "pathology" || s == "pathology-only") return Scenario::kPathologyOnly;
  if (s == "genomics" || s == "genomics-only") return Scenario::kGenomicsOnly;
  throw UsageError("unknown scenario '" + s + "' (expected complete, pathology or genomics)");
}

Scenario scenario_of(bool has_pathology, bool has_genomics) {
  if (has_pathology && has_genomics) return Scenario::kComplete;
  if (has_pathology) return Scenario::kPathologyOnly;
  if (has_genomics) return Scenario::kGenomicsOnly;
  throw DataError("empty sample");
}

Var nll_loss(const Var& hazards, const survival::SurvivalLabel& label) {
  if (hazards.rows() != 1) throw UsageError("nll_loss: hazards must be 1 x K");
  const Eigen::RowVectorXd h = hazards.value().row(0);
  const std::span<const double> hs(h.data(), static_cast<std::size_t>(h.size()));
  const double value = survival::nll_loss(hs, label);
  const auto grad = survival::nll_loss_grad(hs, label);
  Matrix g(1, h.size());
  for (Eigen::Index k = 0; k < h.size(); ++k) g(0, k) = grad[static_cast<std::size_t>(k)];
  return ad::make_op(Matrix::Constant(1, 1, value), {hazards},
                     [g](ad::Node& n) { n.inputs[0]->accumulate(g * n.grad(0, 0)); });
}

LossBreakdown total_loss(const ForwardOutput& out, const survival::SurvivalLabel& label, const LossWeights& weights) {
  if (weights.alpha < 0.0 || weights.beta < 0.0) throw UsageError("loss weights must be nonnegative");
  LossBreakdown br;
  Var total = nll_loss(out.hazards, label);
  br.surv = total.scalar();

  std::optional<Var> sim_p, sim_g;
  if (out.sim_p) sim_p = prototypes::risk_contrastive_loss(*out.sim_p, label);
  if (out.sim_g) sim_g = prototypes::risk_contrastive_loss(*out.sim_g, label);
  br.sim_terms = static_cast<int>(sim_p.has_value()) + static_cast<int>(sim_g.has_value());
  if (br.sim_terms > 0) {
    const Var sim = prototypes::combined_sim_loss(sim_p, sim_g);
    br.sim = sim.scalar();
    if (weights.alpha != 0.0) total = ad::add(total, ad::scale(sim, weights.alpha));
  }

  if (out.scenario == Scenario::kComplete) {
    const Var align_p = translation::alignment_loss(*out.f_p, *out.f_g2p);
    const Var align_g = translation::alignment_loss(*out.f_g, *out.f_p2g);
    br.align_terms = 2;
    const Var align = ad::add(align_p, align_g);
    br.align = align.scalar();
    if (weights.beta != 0.0) total = ad::add(total, ad::scale(align, weights.beta));
  }
  br.total = std::move(total);
  return br;
}

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 step
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

ProSurvModel::ProSurvModel(const ModelConfig& cfg)
    : cfg_(cfg),
      rng_(derive_seed(cfg.seed, 0)),
      path_encoder_(store_, cfg.encoder, rng_),
      gene_encoder_(store_, cfg.encoder, rng_),
      bank_p_(prototypes::make_bank(store_, prototypes::Modality::kPathology, cfg.bins, cfg.prototypes_per_bin,
                                    cfg.encoder.d, derive_seed(cfg.seed, 1))),
      bank_g_(prototypes::make_bank(store_, prototypes::Modality::kGenomics, cfg.bins, cfg.prototypes_per_bin,
                                    cfg.encoder.d, derive_seed(cfg.seed, 2))),
      p2g_(translation::make_translation(store_, translation::Direction::kPathToGene, cfg.encoder.d, cfg.temperature,
                                         rng_)),
      g2p_(translation::make_translation(store_, translation::Direction::kGeneToPath, cfg.encoder.d, cfg.temperature,
                                         rng_)),
      head_(nn::make_linear(store_, "head", 2 * cfg.encoder.d, cfg.bins, true, nn::Init::kUniformFanIn, rng_)) {}

Var ProSurvModel::head_forward(const Var& left, const Var& right) const {
  return ad::sigmoid(head_.forward(ad::concat_cols({left, right})));
}

ForwardOutput ProSurvModel::forward(const std::optional<Var>& patches, const std::optional<Var>& genes,
                                    const nn::ForwardMode& mode) const {
  ForwardOutput out;
  out.scenario = scenario_of(patches.has_value(), genes.has_value());

  const auto bank_for_translation = [this](const prototypes::PrototypeBank& bank) {
    return cfg_.detach_bank_in_translation ? ad::detach(bank.rows) : bank.rows;
  };

  if (patches) {
    out.f_p = path_encoder_.forward(*patches);
    out.sim_p = prototypes::bin_similarity(*out.f_p, bank_p_);
    out.f_p2g = translation::translate(*out.f_p, bank_for_translation(bank_g_), p2g_).feature;
  }
  if (genes) {
    out.f_g = gene_encoder_.forward(*genes, mode);
    out.sim_g = prototypes::bin_similarity(*out.f_g, bank_g_);
    out.f_g2p = translation::translate(*out.f_g, bank_for_translation(bank_p_), g2p_).feature;
  }

  switch (out.scenario) {
    case Scenario::kComplete:
      out.enhanced_p = ad::scale(ad::add(*out.f_p, *out.f_g2p), 0.5);
      out.enhanced_g = ad::scale(ad::add(*out.f_g, *out.f_p2g), 0.5);
      out.hazards = head_forward(*out.enhanced_p, *out.enhanced_g);
      break;
    case Scenario::kPathologyOnly:
      out.hazards = head_forward(*out.f_p, *out.f_p2g);
      break;
    case Scenario::kGenomicsOnly:
      out.hazards = head_forward(*out.f_g2p, *out.f_g);
      break;
  }
  return out;
}

}  // namespace prosurv::model
