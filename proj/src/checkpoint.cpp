#include "prosurv/checkpoint.hpp"

#include "prosurv/errors.hpp"

#include <cstring>
#include <fstream>

namespace prosurv {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFFu));
}
void put_u64(std::ostream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFFu));
}
std::uint64_t get_uint(std::istream& in, int bytes, const std::string& ctx) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw DataError(ctx + ": truncated checkpoint");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

constexpr const char* kGeneMin = "__gene_norm.min";
constexpr const char* kGeneMax = "__gene_norm.max";

}  // namespace

Checkpoint make_checkpoint(const model::ProSurvModel& model, const TrainConfig& config, int d_in, int genes,
                           const survival::BinEdges& edges, const data::GeneNormalizer& normalizer, int epoch,
                           double val_cindex) {
  Checkpoint c;
  c.config = config;
  c.d_in = d_in;
  c.genes = genes;
  c.edges = edges;
  c.gene_normalizer = normalizer;
  c.epoch = epoch;
  c.val_cindex = val_cindex;
  for (const auto& p : model.params().params()) c.tensors.emplace_back(p.name, p.var.value());
  return c;
}

std::unique_ptr<model::ProSurvModel> build_model(const Checkpoint& ckpt) {
  auto m = std::make_unique<model::ProSurvModel>(ckpt.config.model_config(ckpt.d_in, ckpt.genes));
  const auto& params = m->params().params();
  if (params.size() != ckpt.tensors.size()) {
    throw DataError("checkpoint: expected " + std::to_string(params.size()) + " tensors, found " +
                    std::to_string(ckpt.tensors.size()));
  }
  std::vector<Eigen::MatrixXd> values;
  values.reserve(params.size());
  for (const auto& p : params) {
    const Eigen::MatrixXd* found = nullptr;
    for (const auto& [name, value] : ckpt.tensors) {
      if (name == p.name) found = &value;
    }
    if (found == nullptr) throw DataError("checkpoint: missing tensor " + p.name);
    if (found->rows() != p.var.rows() || found->cols() != p.var.cols()) {
      throw DataError("checkpoint: shape mismatch for " + p.name);
    }
    values.push_back(*found);
  }
  m->params().restore(values);
  return m;
}

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  json header{{"config", to_json(ckpt.config)},
              {"d_in", ckpt.d_in},
              {"genes", ckpt.genes},
              {"bin_edges", ckpt.edges.interior},
              {"epoch", ckpt.epoch},
              {"val_cindex", ckpt.val_cindex}};
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write("PSCK", 4);
  put_u32(out, kCheckpointVersion);
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));

  auto tensors = ckpt.tensors;
  tensors.emplace_back(kGeneMin, ckpt.gene_normalizer.min);
  tensors.emplace_back(kGeneMax, ckpt.gene_normalizer.max);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, value] : tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    data::write_tensor(out, data::Tensor::from_matrix(value, data::DType::kFloat64));
  }
  if (!out) throw DataError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
  const std::string ctx = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + ctx);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "PSCK", 4) != 0) throw DataError(ctx + ": not a checkpoint");
  const auto version = get_uint(in, 4, ctx);
  if (version != kCheckpointVersion) throw DataError(ctx + ": unsupported checkpoint version");
  const auto len = get_uint(in, 8, ctx);
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw DataError(ctx + ": truncated header");

  Checkpoint c;
  try {
    const json header = json::parse(text);
    c.config = config_from_json(header.at("config"));
    c.d_in = header.at("d_in").get<int>();
    c.genes = header.at("genes").get<int>();
    c.edges.interior = header.at("bin_edges").get<std::vector<double>>();
    c.epoch = header.at("epoch").get<int>();
    c.val_cindex = header.at("val_cindex").get<double>();
  } catch (const json::exception& e) {
    throw DataError(ctx + ": bad checkpoint header: " + e.what());
  }

  const auto count = get_uint(in, 4, ctx);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = get_uint(in, 4, ctx);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name_len))) throw DataError(ctx + ": truncated name");
    Eigen::MatrixXd value = data::read_tensor(in, ctx + ":" + name).to_matrix();
    if (name == kGeneMin) {
      c.gene_normalizer.min = value.row(0);
    } else if (name == kGeneMax) {
      c.gene_normalizer.max = value.row(0);
    } else {
      c.tensors.emplace_back(std::move(name), std::move(value));
    }
  }
  return c;
}

}  // namespace prosurv
