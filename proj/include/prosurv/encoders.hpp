#pragma once

// Patient-level feature extractors.
//
// PathologyEncoder: patch bag (N x d_in) -> linear projection -> L pre-norm
// transformer layers over the patch axis -> mean over patches (1 x d).
// No positional encoding, so the output does not depend on patch order.
//
// GenomicEncoder: self-normalizing MLP, M -> d -> d with SELU activations,
// LeCun-normal init and alpha dropout.

#include "prosurv/nn.hpp"

#include <string>
#include <vector>

namespace prosurv::encoders {

using ad::Matrix;
using ad::Var;

struct EncoderConfig {
  int d_in = 1024;
  int genes = 0;  // M
  int d = 256;
  int layers = 2;
  int heads = 8;
  int ffn_mult = 2;
  double snn_dropout = 0.1;
};

void validate(const EncoderConfig& cfg);

struct PatchBag {
  std::string patient_id;
  Matrix features;  // N x d_in
};

struct GeneVector {
  Eigen::RowVectorXd values;  // M entries, min-max normalized
};

class TransformerLayer {
 public:
  TransformerLayer(nn::ParamStore& store, const std::string& name, int d, int heads, int ffn_width, nn::Rng& rng);
  Var forward(const Var& x) const;

 private:
  Var self_attention(const Var& x) const;

  int heads_;
  nn::LayerNorm norm1_;
  nn::Linear q_, k_, v_, out_;
  nn::LayerNorm norm2_;
  nn::Linear ff1_, ff2_;
};

class PathologyEncoder {
 public:
  PathologyEncoder(nn::ParamStore& store, const EncoderConfig& cfg, nn::Rng& rng);

  /// `bag` is N x d_in with N >= 1.
  Var forward(const Var& bag) const;

 private:
  int d_in_;
  nn::Linear projection_;
  std::vector<TransformerLayer> layers_;
};

class GenomicEncoder {
 public:
  GenomicEncoder(nn::ParamStore& store, const EncoderConfig& cfg, nn::Rng& rng);

  /// `genes` is 1 x M.
  Var forward(const Var& genes, const nn::ForwardMode& mode) const;

 private:
  int genes_;
  double dropout_;
  nn::Linear fc1_, fc2_;
};

}  // namespace prosurv::encoders
