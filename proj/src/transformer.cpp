#include "tabkanet/transformer.hpp"

#include <stdexcept>

namespace tabkanet {

void EncoderConfig::validate() const {
  if (dim == 0 || heads == 0 || layers == 0)
    throw std::invalid_argument("EncoderConfig: dim/heads/layers must be > 0");
  if (dim % heads != 0)
    throw std::invalid_argument("EncoderConfig: dim " + std::to_string(dim) +
                                " not divisible by heads " +
                                std::to_string(heads));
}

EncoderParams encoder_init(const EncoderConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  EncoderParams p;
  p.layers.reserve(cfg.layers);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    EncoderLayerParams lp;
    lp.wq = Linear::init(cfg.dim, cfg.dim, rng);
    lp.wk = Linear::init(cfg.dim, cfg.dim, rng);
    lp.wv = Linear::init(cfg.dim, cfg.dim, rng);
    lp.wo = Linear::init(cfg.dim, cfg.dim, rng);
    lp.ffn1 = Linear::init(cfg.dim, cfg.ffn_hidden, rng);
    lp.ffn2 = Linear::init(cfg.ffn_hidden, cfg.dim, rng);
    lp.ln1_gamma = Tensor::full({cfg.dim}, 1.0).set_requires_grad(true);
    lp.ln1_beta = Tensor::zeros({cfg.dim}).set_requires_grad(true);
    lp.ln2_gamma = Tensor::full({cfg.dim}, 1.0).set_requires_grad(true);
    lp.ln2_beta = Tensor::zeros({cfg.dim}).set_requires_grad(true);
    p.layers.push_back(std::move(lp));
  }
  return p;
}

namespace {

// Index permutation as an autograd op: out[i] = in[map[i]].
Tensor permute_with_map(const Tensor& x, Shape out_shape,
                        std::shared_ptr<std::vector<std::size_t>> map) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.values()[(*map)[i]];
  return detail::make_node(std::move(out_shape), std::move(out), {x},
                           [map](Tensor::Node& nd) {
                             auto& px = *nd.parents[0];
                             if (!px.requires_grad) return;
                             px.ensure_grad();
                             for (std::size_t i = 0; i < nd.grad.size(); ++i)
                               px.grad[(*map)[i]] += nd.grad[i];
                           });
}

// (B*T) x d  ->  B x h x T x dk
Tensor split_heads(const Tensor& x, std::size_t B, std::size_t T,
                   std::size_t h) {
  std::size_t d = x.dim(1), dk = d / h;
  auto map = std::make_shared<std::vector<std::size_t>>(x.numel());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t hh = 0; hh < h; ++hh)
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t c = 0; c < dk; ++c)
          (*map)[((b * h + hh) * T + t) * dk + c] =
              (b * T + t) * d + hh * dk + c;
  return permute_with_map(x, {B, h, T, dk}, std::move(map));
}

// B x h x T x dk  ->  (B*T) x d
Tensor merge_heads(const Tensor& x) {
  std::size_t B = x.dim(0), h = x.dim(1), T = x.dim(2), dk = x.dim(3);
  std::size_t d = h * dk;
  auto map = std::make_shared<std::vector<std::size_t>>(x.numel());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t hh = 0; hh < h; ++hh)
        for (std::size_t c = 0; c < dk; ++c)
          (*map)[(b * T + t) * d + hh * dk + c] =
              ((b * h + hh) * T + t) * dk + c;
  return permute_with_map(x, {B * T, d}, std::move(map));
}

}  // namespace

Tensor encoder_forward(const EncoderConfig& cfg, const EncoderParams& params,
                       const Tensor& tokens, bool train,
                       std::mt19937_64& rng) {
  if (tokens.ndim() != 3 || tokens.dim(2) != cfg.dim)
    throw std::invalid_argument("encoder_forward: expected [B x T x " +
                                std::to_string(cfg.dim) + "] tokens, got " +
                                shape_str(tokens.shape()));
  std::size_t B = tokens.dim(0), T = tokens.dim(1), d = cfg.dim;
  Tensor x = reshape(tokens, {B * T, d});
  for (const EncoderLayerParams& lp : params.layers) {
    Tensor q = split_heads(lp.wq.apply(x), B, T, cfg.heads);
    Tensor k = split_heads(lp.wk.apply(x), B, T, cfg.heads);
    Tensor v = split_heads(lp.wv.apply(x), B, T, cfg.heads);
    Tensor attn = lp.wo.apply(merge_heads(attention(q, k, v)));
    attn = dropout(attn, cfg.dropout, train, rng);
    x = layer_norm(add(x, attn), lp.ln1_gamma, lp.ln1_beta);

    Tensor ff = lp.ffn2.apply(silu(lp.ffn1.apply(x)));
    ff = dropout(ff, cfg.dropout, train, rng);
    x = layer_norm(add(x, ff), lp.ln2_gamma, lp.ln2_beta);
  }
  return reshape(x, {B, T, d});
}

}  // namespace tabkanet
