#include "prosurv/encoders.hpp"

#include "prosurv/errors.hpp"

#include <cmath>

namespace prosurv::encoders {

void validate(const EncoderConfig& cfg) {
  if (cfg.d_in <= 0 || cfg.genes <= 0 || cfg.d <= 0) throw UsageError("encoder: d_in, genes and d must be positive");
  if (cfg.layers < 0 || cfg.heads <= 0 || cfg.ffn_mult <= 0) throw UsageError("encoder: invalid layers/heads/ffn_mult");
  if (cfg.d % cfg.heads != 0) throw UsageError("encoder: d must be divisible by heads");
  if (cfg.snn_dropout < 0.0 || cfg.snn_dropout >= 1.0) throw UsageError("encoder: snn_dropout must be in [0, 1)");
}

TransformerLayer::TransformerLayer(nn::ParamStore& store, const std::string& name, int d, int heads, int ffn_width,
                                   nn::Rng& rng)
    : heads_(heads),
      norm1_(nn::make_layer_norm(store, name + ".norm1", d)),
      q_(nn::make_linear(store, name + ".attn.q", d, d, true, nn::Init::kUniformFanIn, rng)),
      k_(nn::make_linear(store, name + ".attn.k", d, d, true, nn::Init::kUniformFanIn, rng)),
      v_(nn::make_linear(store, name + ".attn.v", d, d, true, nn::Init::kUniformFanIn, rng)),
      out_(nn::make_linear(store, name + ".attn.out", d, d, true, nn::Init::kUniformFanIn, rng)),
      norm2_(nn::make_layer_norm(store, name + ".norm2", d)),
      ff1_(nn::make_linear(store, name + ".ffn.fc1", d, ffn_width, true, nn::Init::kUniformFanIn, rng)),
      ff2_(nn::make_linear(store, name + ".ffn.fc2", ffn_width, d, true, nn::Init::kUniformFanIn, rng)) {}

Var TransformerLayer::self_attention(const Var& x) const {
  const Var q = q_.forward(x);
  const Var k = k_.forward(x);
  const Var v = v_.forward(x);
  const Eigen::Index d = x.cols();
  const Eigen::Index head_dim = d / heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<Var> outputs;
  outputs.reserve(heads_);
  for (int h = 0; h < heads_; ++h) {
    const Var qh = ad::slice_cols(q, h * head_dim, head_dim);
    const Var kh = ad::slice_cols(k, h * head_dim, head_dim);
    const Var vh = ad::slice_cols(v, h * head_dim, head_dim);
    const Var attn = ad::softmax_rows(ad::scale(ad::matmul_nt(qh, kh), scale));
    outputs.push_back(ad::matmul(attn, vh));
  }
  return out_.forward(heads_ == 1 ? outputs.front() : ad::concat_cols(outputs));
}

Var TransformerLayer::forward(const Var& x) const {
  const Var h = ad::add(x, self_attention(norm1_.forward(x)));
  return ad::add(h, ff2_.forward(ad::gelu(ff1_.forward(norm2_.forward(h)))));
}

PathologyEncoder::PathologyEncoder(nn::ParamStore& store, const EncoderConfig& cfg, nn::Rng& rng)
    : d_in_((validate(cfg), cfg.d_in)),
      projection_(nn::make_linear(store, "path_encoder.proj", cfg.d_in, cfg.d, true, nn::Init::kUniformFanIn, rng)) {
  layers_.reserve(cfg.layers);
  for (int l = 0; l < cfg.layers; ++l) {
    layers_.emplace_back(store, "path_encoder.layer" + std::to_string(l), cfg.d, cfg.heads, cfg.d * cfg.ffn_mult, rng);
  }
}

Var PathologyEncoder::forward(const Var& bag) const {
  if (bag.rows() == 0) throw DataError("empty bag");
  if (bag.cols() != d_in_) {
    throw DataError("pathology encoder: expected " + std::to_string(d_in_) + " features per patch, got " +
                    std::to_string(bag.cols()));
  }
  Var x = ad::gelu(projection_.forward(bag));
  for (const auto& layer : layers_) x = layer.forward(x);
  return ad::mean_rows(x);
}

GenomicEncoder::GenomicEncoder(nn::ParamStore& store, const EncoderConfig& cfg, nn::Rng& rng)
    : genes_((validate(cfg), cfg.genes)),
      dropout_(cfg.snn_dropout),
      fc1_(nn::make_linear(store, "gene_encoder.fc1", cfg.genes, cfg.d, true, nn::Init::kLecunNormal, rng)),
      fc2_(nn::make_linear(store, "gene_encoder.fc2", cfg.d, cfg.d, true, nn::Init::kLecunNormal, rng)) {}

Var GenomicEncoder::forward(const Var& genes, const nn::ForwardMode& mode) const {
  if (genes.rows() != 1 || genes.cols() != genes_) {
    throw DataError("genomic encoder: expected 1x" + std::to_string(genes_) + " input, got " +
                    std::to_string(genes.rows()) + "x" + std::to_string(genes.cols()));
  }
  Var h = nn::alpha_dropout(ad::selu(fc1_.forward(genes)), dropout_, mode);
  return nn::alpha_dropout(ad::selu(fc2_.forward(h)), dropout_, mode);
}

}  // namespace prosurv::encoders
