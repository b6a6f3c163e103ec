#include "prosurv/config.hpp"

#include "prosurv/errors.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace prosurv {

using nlohmann::json;

namespace {

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("config key '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw UsageError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw UsageError(where + ": unknown key '" + key + "'");
  }
}

}  // namespace

void TrainConfig::validate() const {
  const auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (bins < 2) throw UsageError("config: K must be >= 2");
  if (prototypes_per_bin < 1) throw UsageError("config: n must be >= 1");
  if (!positive(temperature)) throw UsageError("config: tau must be positive");
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !std::isfinite(alpha) || !std::isfinite(beta)) {
    throw UsageError("config: alpha and beta must be finite and >= 0");
  }
  if (!positive(learning_rate) || !(weight_decay >= 0.0)) throw UsageError("config: invalid learning_rate/weight_decay");
  if (epochs < 1) throw UsageError("config: epochs must be >= 1");
  if (d < 1 || layers < 0 || heads < 1 || ffn_mult < 1) throw UsageError("config: invalid network shape");
  if (d % heads != 0) throw UsageError("config: d must be divisible by heads");
  if (snn_dropout < 0.0 || snn_dropout >= 1.0) throw UsageError("config: snn_dropout must be in [0, 1)");
  if (max_patches < 1 || grad_accum < 1) throw UsageError("config: max_patches and grad_accum must be >= 1");
  if (folds < 1 || fold < 0 || fold >= folds) throw UsageError("config: fold must lie in [0, folds)");
  double total = 0.0;
  for (double r : split_ratios) {
    if (!(r >= 0.0)) throw UsageError("config: split ratios must be >= 0");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw UsageError("config: split ratios must sum to 1");
}

model::ModelConfig TrainConfig::model_config(int d_in, int genes) const {
  model::ModelConfig mc;
  mc.encoder.d_in = d_in;
  mc.encoder.genes = genes;
  mc.encoder.d = d;
  mc.encoder.layers = layers;
  mc.encoder.heads = heads;
  mc.encoder.ffn_mult = ffn_mult;
  mc.encoder.snn_dropout = snn_dropout;
  mc.bins = bins;
  mc.prototypes_per_bin = prototypes_per_bin;
  mc.temperature = temperature;
  mc.detach_bank_in_translation = detach_bank_in_translation;
  mc.seed = seed;
  return mc;
}

json to_json(const synth::SynthConfig& c) {
  return json{{"num_patients", c.num_patients},
              {"d_in", c.d_in},
              {"genes", c.genes},
              {"mean_patches", c.mean_patches},
              {"missing_rate_path", c.missing_rate_path},
              {"missing_rate_gene", c.missing_rate_gene},
              {"censor_rate", c.censor_rate},
              {"t_max", c.t_max},
              {"time_noise", c.time_noise},
              {"path_signal", c.path_signal},
              {"gene_signal", c.gene_signal},
              {"seed", c.seed}};
}

synth::SynthConfig synth_config_from_json(const json& j) {
  reject_unknown(j,
                 {"num_patients", "d_in", "genes", "mean_patches", "missing_rate_path", "missing_rate_gene",
                  "censor_rate", "t_max", "time_noise", "path_signal", "gene_signal", "seed"},
                 "synth config");
  synth::SynthConfig c;
  read(j, "num_patients", c.num_patients);
  read(j, "d_in", c.d_in);
  read(j, "genes", c.genes);
  read(j, "mean_patches", c.mean_patches);
  read(j, "missing_rate_path", c.missing_rate_path);
  read(j, "missing_rate_gene", c.missing_rate_gene);
  read(j, "censor_rate", c.censor_rate);
  read(j, "t_max", c.t_max);
  read(j, "time_noise", c.time_noise);
  read(j, "path_signal", c.path_signal);
  read(j, "gene_signal", c.gene_signal);
  read(j, "seed", c.seed);
  return c;
}

json to_json(const TrainConfig& c) {
  return json{{"K", c.bins},
              {"n", c.prototypes_per_bin},
              {"tau", c.temperature},
              {"alpha", c.alpha},
              {"beta", c.beta},
              {"learning_rate", c.learning_rate},
              {"weight_decay", c.weight_decay},
              {"epochs", c.epochs},
              {"d", c.d},
              {"layers", c.layers},
              {"heads", c.heads},
              {"ffn_mult", c.ffn_mult},
              {"snn_dropout", c.snn_dropout},
              {"max_patches", c.max_patches},
              {"grad_accum", c.grad_accum},
              {"detach_bank_in_translation", c.detach_bank_in_translation},
              {"seed", c.seed},
              {"fold", c.fold},
              {"folds", c.folds},
              {"split_ratios", c.split_ratios},
              {"manifest", c.manifest},
              {"out_dir", c.out_dir},
              {"synth", to_json(c.synth)}};
}

TrainConfig config_from_json(const json& j) {
  reject_unknown(j,
                 {"K", "n", "tau", "alpha", "beta", "learning_rate", "weight_decay", "epochs", "d", "layers", "heads",
                  "ffn_mult", "snn_dropout", "max_patches", "grad_accum", "detach_bank_in_translation", "seed", "fold",
                  "folds", "split_ratios", "manifest", "out_dir", "synth"},
                 "config");
  TrainConfig c;
  read(j, "K", c.bins);
  read(j, "n", c.prototypes_per_bin);
  read(j, "tau", c.temperature);
  read(j, "alpha", c.alpha);
  read(j, "beta", c.beta);
  read(j, "learning_rate", c.learning_rate);
  read(j, "weight_decay", c.weight_decay);
  read(j, "epochs", c.epochs);
  read(j, "d", c.d);
  read(j, "layers", c.layers);
  read(j, "heads", c.heads);
  read(j, "ffn_mult", c.ffn_mult);
  read(j, "snn_dropout", c.snn_dropout);
  read(j, "max_patches", c.max_patches);
  read(j, "grad_accum", c.grad_accum);
  read(j, "detach_bank_in_translation", c.detach_bank_in_translation);
  read(j, "seed", c.seed);
  read(j, "fold", c.fold);
  read(j, "folds", c.folds);
  read(j, "split_ratios", c.split_ratios);
  read(j, "manifest", c.manifest);
  read(j, "out_dir", c.out_dir);
  if (j.contains("synth")) c.synth = synth_config_from_json(j.at("synth"));
  c.validate();
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config " + path.string() + ": " + e.what());
  }
  TrainConfig c = config_from_json(j);
  // Relative data paths in a config file are relative to the file itself.
  const auto base = path.parent_path();
  if (!c.manifest.empty() && std::filesystem::path(c.manifest).is_relative()) c.manifest = (base / c.manifest).string();
  if (std::filesystem::path(c.out_dir).is_relative()) c.out_dir = (base / c.out_dir).string();
  return c;
}

}  // namespace prosurv
