#pragma once

// Checkpoint container (little-endian):
//   "PSCK" | u32 version | u64 header_len | header JSON (UTF-8)
//   | u32 tensor_count | tensor_count x (u32 name_len | name | PSTN tensor)
// Parameter tensors are stored as float64 so reloads are bit-exact.
// The header carries the run config, data widths, bin edges, selection
// epoch and validation C-index.

#include "prosurv/config.hpp"
#include "prosurv/data_io.hpp"
#include "prosurv/model.hpp"
#include "prosurv/survival.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace prosurv {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  TrainConfig config;
  int d_in = 0;
  int genes = 0;
  survival::BinEdges edges;
  data::GeneNormalizer gene_normalizer;
  int epoch = 0;
  double val_cindex = 0.0;
  std::vector<std::pair<std::string, Eigen::MatrixXd>> tensors;
};

Checkpoint make_checkpoint(const model::ProSurvModel& model, const TrainConfig& config, int d_in, int genes,
                           const survival::BinEdges& edges, const data::GeneNormalizer& normalizer, int epoch,
                           double val_cindex);

/// Builds a model from the checkpoint's config and loads every tensor by name.
std::unique_ptr<model::ProSurvModel> build_model(const Checkpoint& ckpt);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace prosurv
