#pragma once

#include <cstddef>
#include <vector>

#include "tabkanet/tensor.hpp"

namespace tabkanet {

// Uniform knot grid for B-spline bases of degree `order` over
// [lower, upper], extended by `order` knots on each side. G + order basis
// functions cover the domain; outside it the boundary polynomial pieces
// extrapolate.
struct SplineGrid {
  double lower = -2.0;
  double upper = 2.0;
  std::size_t grid_size = 5;  // number of interior intervals G
  std::size_t order = 3;      // spline degree k
  std::vector<double> knots;  // length G + 2k + 1, uniform spacing

  static SplineGrid make(double lower, double upper, std::size_t grid_size,
                         std::size_t order);

  std::size_t num_basis() const { return grid_size + order; }
  double spacing() const {
    return (upper - lower) / static_cast<double>(grid_size);
  }
};

// Cox-de Boor basis values at x: vector of length num_basis(). Inside the
// domain the values are nonnegative and sum to 1.
std::vector<double> bspline_basis(double x, const SplineGrid& grid);

// Basis values and their first derivatives at x (each length num_basis()).
void bspline_basis_and_deriv(double x, const SplineGrid& grid, double* basis,
                             double* deriv);

// Differentiable elementwise basis expansion: input of shape S yields output
// of shape S + [num_basis].
Tensor spline_basis(const Tensor& x, const SplineGrid& grid);

}  // namespace tabkanet
