#include "tabkanet/spline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tabkanet {

SplineGrid SplineGrid::make(double lower, double upper, std::size_t grid_size,
                            std::size_t order) {
  if (grid_size < 1)
    throw std::invalid_argument("SplineGrid: grid_size must be >= 1");
  if (!(lower < upper))
    throw std::invalid_argument("SplineGrid: lower must be < upper");
  SplineGrid g;
  g.lower = lower;
  g.upper = upper;
  g.grid_size = grid_size;
  g.order = order;
  double h = (upper - lower) / static_cast<double>(grid_size);
  g.knots.resize(grid_size + 2 * order + 1);
  for (std::size_t i = 0; i < g.knots.size(); ++i)
    g.knots[i] = lower + (static_cast<double>(i) - static_cast<double>(order)) * h;
  return g;
}

namespace {

// Knot span index m with t_m <= x < t_{m+1}, clamped to the domain spans so
// that evaluations outside [lower, upper] follow the boundary polynomial.
std::size_t find_span(double x, const SplineGrid& g) {
  double h = g.spacing();
  double rel = std::floor((x - g.lower) / h);
  long m = static_cast<long>(g.order) + static_cast<long>(rel);
  long lo = static_cast<long>(g.order);
  long hi = static_cast<long>(g.grid_size + g.order) - 1;
  return static_cast<std::size_t>(std::clamp(m, lo, hi));
}

// The NURBS-book triangular scheme: N[r] = B_{span-k+r, k}(x) for r=0..k.
void basis_at_span(double x, const SplineGrid& g, std::size_t span,
                   std::size_t degree, double* N) {
  const auto& U = g.knots;
  std::vector<double> left(degree + 1), right(degree + 1);
  N[0] = 1.0;
  for (std::size_t j = 1; j <= degree; ++j) {
    left[j] = x - U[span + 1 - j];
    right[j] = U[span + j] - x;
    double saved = 0.0;
    for (std::size_t r = 0; r < j; ++r) {
      double temp = N[r] / (right[r + 1] + left[j - r]);
      N[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    N[j] = saved;
  }
}

}  // namespace

std::vector<double> bspline_basis(double x, const SplineGrid& grid) {
  std::vector<double> out(grid.num_basis(), 0.0);
  std::size_t span = find_span(x, grid);
  std::vector<double> N(grid.order + 1);
  basis_at_span(x, grid, span, grid.order, N.data());
  for (std::size_t r = 0; r <= grid.order; ++r)
    out[span - grid.order + r] = N[r];
  return out;
}

void bspline_basis_and_deriv(double x, const SplineGrid& grid, double* basis,
                             double* deriv) {
  std::size_t nb = grid.num_basis();
  std::fill(basis, basis + nb, 0.0);
  std::fill(deriv, deriv + nb, 0.0);
  std::size_t k = grid.order;
  std::size_t span = find_span(x, grid);
  std::vector<double> N(k + 1);
  basis_at_span(x, grid, span, k, N.data());
  for (std::size_t r = 0; r <= k; ++r) basis[span - k + r] = N[r];
  if (k == 0) return;

  // B'_{j,k} = k * ( B_{j,k-1}/(t_{j+k} - t_j) - B_{j+1,k-1}/(t_{j+k+1} - t_{j+1}) )
  std::vector<double> Nlow(k);
  basis_at_span(x, grid, span, k - 1, Nlow.data());
  const auto& U = grid.knots;
  auto lower_basis = [&](long j) -> double {
    // B_{j,k-1}; indices span-(k-1)..span are held in Nlow
    long r = j - static_cast<long>(span - (k - 1));
    if (r < 0 || r >= static_cast<long>(k)) return 0.0;
    return Nlow[static_cast<std::size_t>(r)];
  };
  double dk = static_cast<double>(k);
  for (std::size_t r = 0; r <= k; ++r) {
    long j = static_cast<long>(span - k + r);
    double a = lower_basis(j) / (U[j + k] - U[j]);
    double b = lower_basis(j + 1) / (U[j + k + 1] - U[j + 1]);
    deriv[span - k + r] = dk * (a - b);
  }
}

Tensor spline_basis(const Tensor& x, const SplineGrid& grid) {
  std::size_t nb = grid.num_basis();
  std::size_t n = x.numel();
  Shape out_shape = x.shape();
  out_shape.push_back(nb);
  std::vector<double> out(n * nb), deriv(n * nb);
  for (std::size_t i = 0; i < n; ++i)
    bspline_basis_and_deriv(x.values()[i], grid, out.data() + i * nb,
                            deriv.data() + i * nb);
  return detail::make_node(std::move(out_shape), std::move(out), {x},
                           [nb, deriv = std::move(deriv)](Tensor::Node& nd) {
                             auto& px = *nd.parents[0];
                             if (!px.requires_grad) return;
                             px.ensure_grad();
                             for (std::size_t i = 0; i < px.val.size(); ++i) {
                               double acc = 0.0;
                               for (std::size_t j = 0; j < nb; ++j)
                                 acc += nd.grad[i * nb + j] * deriv[i * nb + j];
                               px.grad[i] += acc;
                             }
                           });
}

}  // namespace tabkanet
