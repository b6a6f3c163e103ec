#include "prosurv/data_io.hpp"

#include "prosurv/errors.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace prosurv::data {

namespace fs = std::filesystem;

namespace {

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_integral_v<T>);
  unsigned char bytes[sizeof(T)];
  auto u = static_cast<std::make_unsigned_t<T>>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<unsigned char>(u & 0xFFu);
    u = static_cast<decltype(u)>(u >> 8);
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const std::string& context) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw DataError(context + ": truncated tensor header");
  std::make_unsigned_t<T> u = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) u = static_cast<decltype(u)>((u << 8) | bytes[i]);
  return static_cast<T>(u);
}

std::size_t dtype_size(DType d) { return d == DType::kFloat32 ? 4 : 8; }

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::size_t Tensor::numel() const {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         [](std::size_t a, std::uint64_t b) { return a * static_cast<std::size_t>(b); });
}

Eigen::MatrixXd Tensor::to_matrix() const {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  if (dims.size() == 1) {
    rows = 1;
    cols = static_cast<Eigen::Index>(dims[0]);
  } else if (dims.size() == 2) {
    rows = static_cast<Eigen::Index>(dims[0]);
    cols = static_cast<Eigen::Index>(dims[1]);
  } else {
    throw DataError("tensor of rank " + std::to_string(dims.size()) + " cannot be viewed as a matrix");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = values[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

Tensor Tensor::from_matrix(const Eigen::MatrixXd& m, DType dtype) {
  Tensor t;
  t.dtype = dtype;
  t.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  t.values.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      t.values.push_back(dtype == DType::kFloat32 ? static_cast<double>(static_cast<float>(m(r, c))) : m(r, c));
    }
  }
  return t;
}

Tensor Tensor::from_row(const Eigen::RowVectorXd& v, DType dtype) {
  Tensor t = from_matrix(v, dtype);
  t.dims = {static_cast<std::uint64_t>(v.size())};
  return t;
}

void write_tensor(std::ostream& out, const Tensor& t) {
  if (t.dims.size() > 255) throw UsageError("write_tensor: rank exceeds 255");
  if (t.values.size() != t.numel()) throw UsageError("write_tensor: value count does not match dims");
  out.write("PSTN", 4);
  put_le<std::uint32_t>(out, kTensorVersion);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.dtype));
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.dims.size()));
  for (auto d : t.dims) put_le<std::uint64_t>(out, d);
  for (double v : t.values) {
    if (t.dtype == DType::kFloat32) {
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    } else {
      put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
  }
}

Tensor read_tensor(std::istream& in, const std::string& context) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "PSTN", 4) != 0) throw DataError(context + ": bad tensor magic");
  const auto version = get_le<std::uint32_t>(in, context);
  if (version != kTensorVersion) throw DataError(context + ": unsupported tensor version " + std::to_string(version));
  Tensor t;
  const auto dtype = get_le<std::uint8_t>(in, context);
  if (dtype > 1) throw DataError(context + ": unknown dtype code " + std::to_string(dtype));
  t.dtype = static_cast<DType>(dtype);
  const auto rank = get_le<std::uint8_t>(in, context);
  for (int i = 0; i < rank; ++i) t.dims.push_back(get_le<std::uint64_t>(in, context));
  const std::size_t n = t.numel();
  std::vector<unsigned char> payload(n * dtype_size(t.dtype));
  if (!in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()))) {
    throw DataError(context + ": truncated tensor payload");
  }
  t.values.resize(n);
  const std::size_t width = dtype_size(t.dtype);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t u = 0;
    for (std::size_t b = width; b-- > 0;) u = (u << 8) | payload[i * width + b];
    t.values[i] = t.dtype == DType::kFloat32 ? static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(u)))
                                             : std::bit_cast<double>(u);
  }
  return t;
}

void write_tensor_file(const fs::path& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_tensor(out, t);
  if (!out) throw DataError("write failed: " + path.string());
}

Tensor read_tensor_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open tensor file " + path.string());
  return read_tensor(in, path.string());
}

std::vector<ManifestRecord> parse_manifest(std::istream& in, const fs::path& base_dir) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("manifest: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (trim(line) != kManifestHeader) {
    throw DataError("manifest: header must be '" + std::string(kManifestHeader) + "', got '" + line + "'");
  }
  std::vector<ManifestRecord> records;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    const std::string where = "manifest row " + std::to_string(row);
    if (cells.size() != 5) throw DataError(where + ": expected 5 columns, got " + std::to_string(cells.size()));
    ManifestRecord rec;
    rec.patient_id = trim(cells[0]);
    if (rec.patient_id.empty()) throw DataError(where + ": empty patient_id");
    const auto resolve = [&](const std::string& cell) -> std::optional<fs::path> {
      const std::string p = trim(cell);
      if (p.empty()) return std::nullopt;
      fs::path path(p);
      return path.is_absolute() ? path : base_dir / path;
    };
    rec.pathology_path = resolve(cells[1]);
    rec.genomics_path = resolve(cells[2]);
    if (!rec.pathology_path && !rec.genomics_path) throw DataError(where + ": no modality");

    const std::string months = trim(cells[3]);
    const auto mres = std::from_chars(months.data(), months.data() + months.size(), rec.months);
    if (mres.ec != std::errc{} || mres.ptr != months.data() + months.size() || !std::isfinite(rec.months) ||
        rec.months <= 0.0) {
      throw DataError(where + ": months must be a positive number, got '" + months + "'");
    }
    const std::string cens = trim(cells[4]);
    if (cens != "0" && cens != "1") throw DataError(where + ": censorship must be 0 or 1, got '" + cens + "'");
    rec.censorship = cens == "1" ? 1 : 0;
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<ManifestRecord> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  return parse_manifest(in, path.parent_path());
}

void write_manifest(std::ostream& out, const std::vector<ManifestRecord>& records) {
  out << kManifestHeader << '\n';
  for (const auto& r : records) {
    out << r.patient_id << ',' << (r.pathology_path ? r.pathology_path->generic_string() : "") << ','
        << (r.genomics_path ? r.genomics_path->generic_string() : "") << ',' << format_double(r.months) << ','
        << r.censorship << '\n';
  }
}

Dataset load_dataset(const fs::path& manifest_path) {
  const auto records = load_manifest(manifest_path);
  Dataset ds;
  ds.samples.reserve(records.size());
  const auto check_finite = [](const Eigen::MatrixXd& m, const fs::path& p) {
    if (!m.allFinite()) throw DataError(p.string() + ": non-finite entries");
  };
  for (const auto& rec : records) {
    Sample s;
    s.patient_id = rec.patient_id;
    s.months = rec.months;
    s.censorship = rec.censorship;
    if (rec.pathology_path) {
      const auto t = read_tensor_file(*rec.pathology_path);
      if (t.dims.size() != 2 || t.dims[0] == 0) throw DataError(rec.pathology_path->string() + ": expected N x d_in with N >= 1");
      Eigen::MatrixXd m = t.to_matrix();
      check_finite(m, *rec.pathology_path);
      if (ds.d_in == 0) ds.d_in = static_cast<int>(m.cols());
      if (m.cols() != ds.d_in) throw DataError(rec.pathology_path->string() + ": inconsistent patch feature width");
      s.patches = std::move(m);
    }
    if (rec.genomics_path) {
      const auto t = read_tensor_file(*rec.genomics_path);
      if (t.dims.size() != 1 && !(t.dims.size() == 2 && t.dims[0] == 1)) {
        throw DataError(rec.genomics_path->string() + ": expected a gene vector");
      }
      Eigen::MatrixXd m = t.to_matrix();
      check_finite(m, *rec.genomics_path);
      if (ds.genes == 0) ds.genes = static_cast<int>(m.cols());
      if (m.cols() != ds.genes) throw DataError(rec.genomics_path->string() + ": inconsistent gene count");
      s.genes = Eigen::RowVectorXd(m.row(0));
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

GeneNormalizer GeneNormalizer::fit(const Dataset& ds, const std::vector<std::size_t>& indices) {
  GeneNormalizer norm;
  bool any = false;
  for (auto i : indices) {
    const auto& s = ds.samples.at(i);
    if (!s.genes) continue;
    if (!any) {
      norm.min = *s.genes;
      norm.max = *s.genes;
      any = true;
    } else {
      norm.min = norm.min.cwiseMin(*s.genes);
      norm.max = norm.max.cwiseMax(*s.genes);
    }
  }
  if (!any) {
    // No genomic sample to fit on; identity scaling.
    norm.min = Eigen::RowVectorXd::Zero(ds.genes);
    norm.max = Eigen::RowVectorXd::Ones(ds.genes);
  }
  return norm;
}

Eigen::RowVectorXd GeneNormalizer::apply(const Eigen::RowVectorXd& raw) const {
  if (raw.size() != min.size()) throw DataError("gene normalizer: width mismatch");
  Eigen::RowVectorXd out(raw.size());
  for (Eigen::Index j = 0; j < raw.size(); ++j) {
    const double span = max(j) - min(j);
    out(j) = span > 0.0 ? std::clamp((raw(j) - min(j)) / span, 0.0, 1.0) : 0.0;
  }
  return out;
}

std::vector<FoldSplit> split_folds(std::size_t num_records, std::array<double, 3> ratios, int folds,
                                   std::uint64_t seed) {
  if (folds < 1) throw UsageError("split_folds: folds must be >= 1");
  for (double r : ratios) {
    if (r < 0.0) throw UsageError("split_folds: ratios must be nonnegative");
  }
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9) throw UsageError("split_folds: ratios must sum to 1");
  if (num_records < static_cast<std::size_t>(folds) * 5) {
    throw DataError("split_folds: need at least " + std::to_string(folds * 5) + " records, got " +
                    std::to_string(num_records));
  }
  const auto n = static_cast<double>(num_records);
  const auto n_train = static_cast<std::size_t>(std::llround(ratios[0] * n));
  const auto n_val = std::min(num_records - n_train, static_cast<std::size_t>(std::llround(ratios[1] * n)));

  std::vector<FoldSplit> out;
  for (int f = 0; f < folds; ++f) {
    std::vector<std::size_t> perm(num_records);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed * 1000003ULL + static_cast<std::uint64_t>(f));
    std::shuffle(perm.begin(), perm.end(), rng);
    FoldSplit split;
    split.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                     perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    split.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.val.begin(), split.val.end());
    std::sort(split.test.begin(), split.test.end());
    out.push_back(std::move(split));
  }
  return out;
}

}  // namespace prosurv::data
