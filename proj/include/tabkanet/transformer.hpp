#pragma once

#include <random>
#include <vector>

#include "tabkanet/nn.hpp"
#include "tabkanet/tensor.hpp"

namespace tabkanet {

struct EncoderConfig {
  std::size_t dim = 64;
  std::size_t heads = 8;
  std::size_t layers = 3;
  std::size_t ffn_hidden = 256;
  double dropout = 0.1;

  void validate() const;
};

struct EncoderLayerParams {
  Linear wq, wk, wv, wo;
  Linear ffn1, ffn2;
  Tensor ln1_gamma, ln1_beta;
  Tensor ln2_gamma, ln2_beta;
};

struct EncoderParams {
  std::vector<EncoderLayerParams> layers;
};

EncoderParams encoder_init(const EncoderConfig& cfg, std::mt19937_64& rng);

// Post-norm encoder over B x T x d token matrices; tokens are an unordered
// column set, so there is no masking and no positional encoding.
Tensor encoder_forward(const EncoderConfig& cfg, const EncoderParams& params,
                       const Tensor& tokens, bool train, std::mt19937_64& rng);

}  // namespace tabkanet
