#pragma once

#include <cmath>
#include <random>

#include "tabkanet/ops.hpp"

namespace tabkanet {

// Dense map y = x W + b with W stored input-major [in x out].
struct Linear {
  Tensor w;
  Tensor b;

  static Linear init(std::size_t in, std::size_t out, std::mt19937_64& rng) {
    Linear l;
    double s = 1.0 / std::sqrt(static_cast<double>(in));
    l.w = Tensor::uniform({in, out}, rng, -s, s).set_requires_grad(true);
    l.b = Tensor::zeros({out}).set_requires_grad(true);
    return l;
  }

  Tensor apply(const Tensor& x) const { return add_rowwise(matmul(x, w), b); }
};

}  // namespace tabkanet
