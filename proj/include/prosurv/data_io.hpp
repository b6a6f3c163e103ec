#pragma once

// Dataset plumbing: the PSTN tensor container, the CSV manifest, in-memory
// datasets, per-gene min-max normalization, and fold splitting.
//
// PSTN layout (all integers little-endian):
//   "PSTN" | u32 version | u8 dtype | u8 rank | rank x u64 dims | payload
// dtype 0 = float32, 1 = float64; payload is row-major.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace prosurv::data {

inline constexpr std::uint32_t kTensorVersion = 1;

enum class DType : std::uint8_t { kFloat32 = 0, kFloat64 = 1 };

struct Tensor {
  DType dtype = DType::kFloat32;
  std::vector<std::uint64_t> dims;
  std::vector<double> values;  // row-major; float32 values are stored widened

  std::size_t numel() const;
  /// Rank 1 -> 1 x n, rank 2 -> rows x cols.
  Eigen::MatrixXd to_matrix() const;
  static Tensor from_matrix(const Eigen::MatrixXd& m, DType dtype);
  static Tensor from_row(const Eigen::RowVectorXd& v, DType dtype);
};

void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in, const std::string& context);
void write_tensor_file(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor_file(const std::filesystem::path& path);

inline constexpr const char* kManifestHeader = "patient_id,pathology_path,genomics_path,months,censorship";

struct ManifestRecord {
  std::string patient_id;
  std::optional<std::filesystem::path> pathology_path;
  std::optional<std::filesystem::path> genomics_path;
  double months = 0.0;
  int censorship = 0;
};

/// Relative paths are resolved against the manifest's directory.
std::vector<ManifestRecord> load_manifest(const std::filesystem::path& path);
std::vector<ManifestRecord> parse_manifest(std::istream& in, const std::filesystem::path& base_dir);
void write_manifest(std::ostream& out, const std::vector<ManifestRecord>& records);

struct Sample {
  std::string patient_id;
  std::optional<Eigen::MatrixXd> patches;    // N x d_in
  std::optional<Eigen::RowVectorXd> genes;   // 1 x M, raw or normalized
  double months = 0.0;
  int censorship = 0;

  bool has_pathology() const { return patches.has_value(); }
  bool has_genomics() const { return genes.has_value(); }
};

struct Dataset {
  std::vector<Sample> samples;
  int d_in = 0;
  int genes = 0;
};

/// Loads every tensor named by the manifest and checks widths are consistent.
Dataset load_dataset(const std::filesystem::path& manifest_path);

// Per-gene min-max scaling fitted on a subset of samples.
struct GeneNormalizer {
  Eigen::RowVectorXd min;
  Eigen::RowVectorXd max;

  static GeneNormalizer fit(const Dataset& ds, const std::vector<std::size_t>& indices);
  /// Scales into [0, 1]; values outside the fitted range are clamped.
  Eigen::RowVectorXd apply(const Eigen::RowVectorXd& raw) const;
};

struct FoldSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// One independent random partition per fold, sized round(r_train * n),
/// round(r_val * n) and the remainder. Deterministic in `seed`.
std::vector<FoldSplit> split_folds(std::size_t num_records, std::array<double, 3> ratios, int folds,
                                   std::uint64_t seed);

}  // namespace prosurv::data
