#pragma once

// Run configuration. Files are flat JSON objects; the optional "synth"
// member configures synth-gen. Unknown keys are rejected.

#include "prosurv/model.hpp"
#include "prosurv/synth.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

namespace prosurv {

struct TrainConfig {
  int bins = 4;                 // K
  int prototypes_per_bin = 32;  // n
  double temperature = 0.5;     // tau
  double alpha = 0.2;
  double beta = 0.2;
  double learning_rate = 1e-4;
  double weight_decay = 1e-4;
  int epochs = 50;
  int d = 256;
  int layers = 2;
  int heads = 8;
  int ffn_mult = 2;
  double snn_dropout = 0.1;
  int max_patches = 4096;
  int grad_accum = 1;
  bool detach_bank_in_translation = false;
  std::uint64_t seed = 1;
  int fold = 0;
  int folds = 5;
  std::array<double, 3> split_ratios{0.6, 0.2, 0.2};
  std::string manifest;
  std::string out_dir = "runs";
  synth::SynthConfig synth;

  void validate() const;
  model::ModelConfig model_config(int d_in, int genes) const;
  model::LossWeights loss_weights() const { return {alpha, beta}; }
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const nlohmann::json& j);
TrainConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const synth::SynthConfig& cfg);
synth::SynthConfig synth_config_from_json(const nlohmann::json& j);

}  // namespace prosurv
