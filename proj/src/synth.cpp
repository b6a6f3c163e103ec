#include "prosurv/synth.hpp"

#include "prosurv/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

namespace prosurv::synth {

namespace fs = std::filesystem;

void validate(const SynthConfig& cfg) {
  if (cfg.num_patients <= 0 || cfg.d_in <= 0 || cfg.genes <= 0) throw UsageError("synth: counts must be positive");
  if (!(cfg.mean_patches >= 1.0)) throw UsageError("synth: mean_patches must be >= 1");
  const auto rate_ok = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!rate_ok(cfg.missing_rate_path) || !rate_ok(cfg.missing_rate_gene) || !rate_ok(cfg.censor_rate)) {
    throw UsageError("synth: rates must lie in [0, 1]");
  }
  if (cfg.missing_rate_path + cfg.missing_rate_gene > 1.0) {
    throw UsageError("synth: missing_rate_path + missing_rate_gene must not exceed 1");
  }
  if (!(cfg.t_max > 0.0) || cfg.time_noise < 0.0) throw UsageError("synth: t_max must be positive, time_noise >= 0");
}

namespace {

Eigen::RowVectorXd unit_direction(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::RowVectorXd u(dim);
  for (int i = 0; i < dim; ++i) u(i) = g(rng);
  return u / u.norm();
}

std::string patient_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "p%05d", i);
  return buf;
}

}  // namespace

std::vector<SynthPatient> generate(const SynthConfig& cfg) {
  validate(cfg);
  std::mt19937_64 dir_rng(cfg.seed);
  const Eigen::RowVectorXd u_p = unit_direction(cfg.d_in, dir_rng);
  const Eigen::RowVectorXd u_g = unit_direction(cfg.genes, dir_rng);

  std::vector<SynthPatient> out;
  out.reserve(static_cast<std::size_t>(cfg.num_patients));
  for (int i = 0; i < cfg.num_patients; ++i) {
    // Per-patient stream so each patient is independent of generation order.
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(i), 0x5EEDu};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    SynthPatient p;
    p.record.patient_id = patient_name(i);
    p.latent_risk = unif(rng);
    p.event_months = cfg.t_max * (1.0 - p.latent_risk) * std::exp(cfg.time_noise * gauss(rng));
    p.event_months = std::max(p.event_months, 1e-3);
    const bool censored = unif(rng) < cfg.censor_rate;
    const double truncation = std::max(unif(rng), 1e-3);
    p.record.months = censored ? p.event_months * truncation : p.event_months;
    p.record.censorship = censored ? 1 : 0;

    std::poisson_distribution<int> count(cfg.mean_patches);
    const int n_patches = std::max(1, count(rng));
    Eigen::MatrixXd patches(n_patches, cfg.d_in);
    for (int r = 0; r < n_patches; ++r) {
      for (int c = 0; c < cfg.d_in; ++c) patches(r, c) = gauss(rng);
      patches.row(r) += cfg.path_signal * p.latent_risk * u_p;
    }
    Eigen::RowVectorXd genes(cfg.genes);
    for (int c = 0; c < cfg.genes; ++c) genes(c) = gauss(rng);
    genes += cfg.gene_signal * p.latent_risk * u_g;

    const double drop = unif(rng);
    const bool drop_path = drop < cfg.missing_rate_path;
    const bool drop_gene = !drop_path && drop < cfg.missing_rate_path + cfg.missing_rate_gene;
    if (!drop_path) p.patches = std::move(patches);
    if (!drop_gene) p.genes = std::move(genes);
    out.push_back(std::move(p));
  }
  return out;
}

fs::path write_dataset(const SynthConfig& cfg, const fs::path& out_dir) {
  auto patients = generate(cfg);
  std::error_code ec;
  fs::create_directories(out_dir / "feat", ec);
  if (ec) throw DataError("cannot create " + (out_dir / "feat").string() + ": " + ec.message());
  fs::create_directories(out_dir / "gene", ec);
  if (ec) throw DataError("cannot create " + (out_dir / "gene").string() + ": " + ec.message());

  std::vector<data::ManifestRecord> records;
  records.reserve(patients.size());
  for (auto& p : patients) {
    if (p.patches.size() > 0) {
      const fs::path rel = fs::path("feat") / (p.record.patient_id + ".pstn");
      data::write_tensor_file(out_dir / rel, data::Tensor::from_matrix(p.patches, data::DType::kFloat32));
      p.record.pathology_path = rel;
    }
    if (p.genes.size() > 0) {
      const fs::path rel = fs::path("gene") / (p.record.patient_id + ".pstn");
      data::write_tensor_file(out_dir / rel, data::Tensor::from_row(p.genes, data::DType::kFloat32));
      p.record.genomics_path = rel;
    }
    records.push_back(p.record);
  }

  const fs::path manifest = out_dir / "manifest.csv";
  {
    std::ofstream out(manifest, std::ios::trunc);
    if (!out) throw DataError("cannot write " + manifest.string());
    data::write_manifest(out, records);
  }
  {
    std::ofstream out(out_dir / "latent.csv", std::ios::trunc);
    if (!out) throw DataError("cannot write " + (out_dir / "latent.csv").string());
    out.precision(17);
    out << "patient_id,latent_risk,event_months\n";
    for (const auto& p : patients) out << p.record.patient_id << ',' << p.latent_risk << ',' << p.event_months << '\n';
  }
  return manifest;
}

}  // namespace prosurv::synth
