#pragma once

#include <random>

#include "tabkanet/spline.hpp"
#include "tabkanet/tensor.hpp"

namespace tabkanet {

// One KAN layer: every input/output edge carries a learnable univariate
// function, realized as spline coefficients over a shared grid plus a
// SiLU base path with a learnable weight:
//   out[q] = sum_p ( base_weight[q,p] * silu(x[p])
//                    + sum_j spline_coeffs[q,p,j] * B_j(x[p]) )
struct KanLayer {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  SplineGrid grid;
  Tensor spline_coeffs;  // [out_dim x in_dim x num_basis]
  Tensor base_weight;    // [out_dim x in_dim]
};

// base_weight ~ U(-s, s) with s = scale / sqrt(in_dim); spline_coeffs start as
// small noise (std 0.1 * scale) so the layer begins near its base activation.
KanLayer kan_init(std::size_t in_dim, std::size_t out_dim,
                  const SplineGrid& grid, double scale, std::mt19937_64& rng);

// x: [B x in_dim] -> [B x out_dim]; differentiable in x and both parameters.
Tensor kan_forward(const KanLayer& layer, const Tensor& x);

}  // namespace tabkanet
