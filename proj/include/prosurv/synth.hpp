#pragma once

// Synthetic survival cohorts with a planted risk signal.
//
// Each patient gets a latent risk z ~ U(0, 1). The event time is
// t_max * (1 - z) * exp(N(0, time_noise^2)). Patch rows are N(0, I) plus
// path_signal * z * u_p and the gene vector is N(0, I) plus
// gene_signal * z * u_g, for fixed random unit directions u_p and u_g, so both
// modalities carry the risk with independent noise.

#include "prosurv/data_io.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace prosurv::synth {

struct SynthConfig {
  int num_patients = 500;
  int d_in = 32;
  int genes = 32;
  double mean_patches = 16.0;
  double missing_rate_path = 0.0;
  double missing_rate_gene = 0.0;
  double censor_rate = 0.3;
  double t_max = 120.0;
  double time_noise = 0.1;
  double path_signal = 3.0;
  double gene_signal = 3.0;
  std::uint64_t seed = 1;
};

void validate(const SynthConfig& cfg);

struct SynthPatient {
  data::ManifestRecord record;
  double latent_risk = 0.0;
  double event_months = 0.0;  // before censoring
  Eigen::MatrixXd patches;     // empty when pathology is missing
  Eigen::RowVectorXd genes;    // empty when genomics is missing
};

/// Draws the cohort in memory; record paths are left unset.
std::vector<SynthPatient> generate(const SynthConfig& cfg);

/// Writes manifest.csv, latent.csv (patient_id,latent_risk,event_months) and
/// one PSTN file per present modality under `out_dir`. Returns the manifest path.
std::filesystem::path write_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace prosurv::synth
