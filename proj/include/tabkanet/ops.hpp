#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "tabkanet/tensor.hpp"

namespace tabkanet {

// Elementwise; shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

// y[r, :] = a[r, :] + bias for every row r of a 2-D tensor.
Tensor add_rowwise(const Tensor& a, const Tensor& bias);

// 2-D matrix product. Gradient: dA = dC * B^T, dB = A^T * dC.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor relu(const Tensor& a);
Tensor silu(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
Tensor transpose2d(const Tensor& a);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Mean over the middle axis of a B x M x D tensor -> B x D.
Tensor mean_axis1(const Tensor& a);

// Softmax along the last axis, stabilized by max subtraction.
Tensor softmax(const Tensor& a);

Tensor dropout(const Tensor& a, double p, bool train, std::mt19937_64& rng);

// Gathers rows of `table` (V x d). Gradient scatter-adds into the table.
Tensor embedding_lookup(const Tensor& table, const std::vector<std::size_t>& ids);

// Per-feature running statistics plus the learnable affine of batch norm.
struct BNState {
  Tensor gamma;         // [n]
  Tensor beta;          // [n]
  std::vector<double> running_mean;
  std::vector<double> running_var;  // biased batch variance
  double eps = 1e-5;
  double momentum = 0.1;

  static BNState init(std::size_t n, double eps = 1e-5, double momentum = 0.1);
};

// Train mode normalizes each column by batch statistics (B >= 2 required) and
// updates the running statistics; eval mode uses the running statistics.
Tensor batch_norm(const Tensor& x, BNState& state, bool train);

// Normalizes each row of a 2-D tensor across its features.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

// Scaled dot-product attention over B x h x T x dk inputs, no masking.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v);

// Mean losses. Targets are plain data, never graph nodes.
Tensor cross_entropy_with_logits(const Tensor& logits,
                                 const std::vector<std::size_t>& targets);
Tensor binary_cross_entropy_with_logits(const Tensor& logits,
                                        const std::vector<double>& targets);
Tensor mse_loss(const Tensor& pred, const std::vector<double>& targets);

// Central-difference gradient check: returns the max elementwise relative
// error between reverse-mode and numeric gradients, with denominator
// max(|analytic|, |numeric|, 1e-8).
double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                  double step = 1e-6);

namespace detail {
// Caps the BLAS backend's own thread pool (no-op if the backend has none).
void blas_set_threads(int n);
}  // namespace detail

}  // namespace tabkanet
