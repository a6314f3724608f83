#include "tabkanet/kan.hpp"

#include <stdexcept>

#include "tabkanet/ops.hpp"

namespace tabkanet {

KanLayer kan_init(std::size_t in_dim, std::size_t out_dim,
                  const SplineGrid& grid, double scale, std::mt19937_64& rng) {
  if (in_dim < 1 || out_dim < 1)
    throw std::invalid_argument("kan_init: dims must be >= 1");
  KanLayer layer;
  layer.in_dim = in_dim;
  layer.out_dim = out_dim;
  layer.grid = grid;
  double s = scale / std::sqrt(static_cast<double>(in_dim));
  layer.base_weight =
      Tensor::uniform({out_dim, in_dim}, rng, -s, s).set_requires_grad(true);
  layer.spline_coeffs =
      Tensor::randn({out_dim, in_dim, grid.num_basis()}, rng, 0.1 * scale)
          .set_requires_grad(true);
  return layer;
}

Tensor kan_forward(const KanLayer& layer, const Tensor& x) {
  if (x.ndim() != 2 || x.dim(1) != layer.in_dim) {
    throw std::invalid_argument("kan_forward: expected [B x " +
                                std::to_string(layer.in_dim) + "] input, got " +
                                shape_str(x.shape()));
  }
  std::size_t B = x.dim(0);
  std::size_t nb = layer.grid.num_basis();
  // spline path: [B x in*nb] * [in*nb x out]
  Tensor basis = reshape(spline_basis(x, layer.grid), {B, layer.in_dim * nb});
  Tensor coeff2d = transpose2d(
      reshape(layer.spline_coeffs, {layer.out_dim, layer.in_dim * nb}));
  Tensor spline_out = matmul(basis, coeff2d);
  // base path: silu(x) * base_weight^T
  Tensor base_out = matmul(silu(x), transpose2d(layer.base_weight));
  return add(spline_out, base_out);
}

}  // namespace tabkanet
