#include "tabkanet/ops.hpp"

#include <cblas.h>
#include <dlfcn.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace tabkanet {

namespace {

#if defined(__GLIBC__)
// Training rebuilds the graph every batch, allocating tens of MB of
// short-lived buffers. Keeping large blocks on the heap instead of
// round-tripping through mmap avoids page-fault churn on the hot path.
const bool malloc_tuned = [] {
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
  return true;
}();
#endif

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
}

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                  : std::exp(z) / (1.0 + std::exp(z));
}

// log(1 + e^z), overflow-safe
double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

// OpenBLAS is loaded at runtime rather than linked, so the kernel choice can
// be steered before the library initializes: its dynamic-arch dispatch table
// only knows CPUs that existed when it was built and silently falls back to a
// generic SSE kernel (several times slower) on anything newer. If the user has
// not pinned OPENBLAS_CORETYPE themselves, pick the widest kernel this CPU
// can run.
struct BlasRuntime {
  decltype(&cblas_dgemm) dgemm = nullptr;
  void (*set_threads)(int) = nullptr;

  BlasRuntime() {
    if (!std::getenv("OPENBLAS_CORETYPE")) {
      if (__builtin_cpu_supports("avx512f") &&
          __builtin_cpu_supports("avx512dq"))
        setenv("OPENBLAS_CORETYPE", "SKYLAKEX", 0);
      else if (__builtin_cpu_supports("avx2"))
        setenv("OPENBLAS_CORETYPE", "HASWELL", 0);
    }
    void* h = dlopen("libopenblas.so.0", RTLD_NOW | RTLD_GLOBAL);
    if (!h) h = dlopen("libopenblas.so", RTLD_NOW | RTLD_GLOBAL);
#ifdef TABKANET_OPENBLAS_PATH
    if (!h) h = dlopen(TABKANET_OPENBLAS_PATH, RTLD_NOW | RTLD_GLOBAL);
#endif
    if (!h) throw std::runtime_error("failed to load OpenBLAS: " +
                                     std::string(dlerror()));
    dgemm = reinterpret_cast<decltype(dgemm)>(dlsym(h, "cblas_dgemm"));
    if (!dgemm)
      throw std::runtime_error("OpenBLAS does not export cblas_dgemm");
    set_threads = reinterpret_cast<void (*)(int)>(
        dlsym(h, "openblas_set_num_threads"));
  }
};

BlasRuntime& blas() {
  static BlasRuntime rt;
  return rt;
}

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, double alpha, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double beta, double* c,
          std::size_t ldc) {
  blas().dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
               trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m),
               static_cast<int>(n), static_cast<int>(k), alpha, a,
               static_cast<int>(lda), b, static_cast<int>(ldb), beta, c,
               static_cast<int>(ldc));
}

}  // namespace

namespace detail {

void blas_set_threads(int n) {
  if (blas().set_threads) blas().set_threads(n);
}

}  // namespace detail

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.values()[i] + b.values()[i];
  return detail::make_node(a.shape(), std::move(out), {a, b},
                           [](Tensor::Node& n) {
                             for (int p = 0; p < 2; ++p) {
                               auto& par = *n.parents[p];
                               if (!par.requires_grad) continue;
                               par.ensure_grad();
                               for (std::size_t i = 0; i < n.grad.size(); ++i)
                                 par.grad[i] += n.grad[i];
                             }
                           });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.values()[i] - b.values()[i];
  return detail::make_node(a.shape(), std::move(out), {a, b},
                           [](Tensor::Node& n) {
                             for (int p = 0; p < 2; ++p) {
                               auto& par = *n.parents[p];
                               if (!par.requires_grad) continue;
                               par.ensure_grad();
                               double sign = p == 0 ? 1.0 : -1.0;
                               for (std::size_t i = 0; i < n.grad.size(); ++i)
                                 par.grad[i] += sign * n.grad[i];
                             }
                           });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.values()[i] * b.values()[i];
  return detail::make_node(a.shape(), std::move(out), {a, b},
                           [](Tensor::Node& n) {
                             auto& pa = *n.parents[0];
                             auto& pb = *n.parents[1];
                             if (pa.requires_grad) {
                               pa.ensure_grad();
                               for (std::size_t i = 0; i < n.grad.size(); ++i)
                                 pa.grad[i] += n.grad[i] * pb.val[i];
                             }
                             if (pb.requires_grad) {
                               pb.ensure_grad();
                               for (std::size_t i = 0; i < n.grad.size(); ++i)
                                 pb.grad[i] += n.grad[i] * pa.val[i];
                             }
                           });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * a.values()[i];
  return detail::make_node(a.shape(), std::move(out), {a},
                           [c](Tensor::Node& n) {
                             auto& pa = *n.parents[0];
                             if (!pa.requires_grad) return;
                             pa.ensure_grad();
                             for (std::size_t i = 0; i < n.grad.size(); ++i)
                               pa.grad[i] += c * n.grad[i];
                           });
}

Tensor add_rowwise(const Tensor& a, const Tensor& bias) {
  if (a.ndim() != 2 || bias.ndim() != 1 || bias.dim(0) != a.dim(1)) {
    throw std::invalid_argument("add_rowwise: incompatible shapes " +
                                shape_str(a.shape()) + " and " +
                                shape_str(bias.shape()));
  }
  std::size_t rows = a.dim(0), cols = a.dim(1);
  std::vector<double> out(a.numel());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      out[r * cols + c] = a.values()[r * cols + c] + bias.values()[c];
  return detail::make_node(
      a.shape(), std::move(out), {a, bias},
      [rows, cols](Tensor::Node& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        if (pa.requires_grad) {
          pa.ensure_grad();
          for (std::size_t i = 0; i < n.grad.size(); ++i)
            pa.grad[i] += n.grad[i];
        }
        if (pb.requires_grad) {
          pb.ensure_grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c)
              pb.grad[c] += n.grad[r * cols + c];
        }
      });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul: shape mismatch " +
                                shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  }
  std::size_t p = a.dim(0), q = a.dim(1), r = b.dim(1);
  std::vector<double> out(p * r, 0.0);
  gemm(false, false, p, r, q, 1.0, a.values().data(), q, b.values().data(), r,
       0.0, out.data(), r);
  return detail::make_node(
      {p, r}, std::move(out), {a, b}, [p, q, r](Tensor::Node& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        if (pa.requires_grad) {
          pa.ensure_grad();
          gemm(false, true, p, q, r, 1.0, n.grad.data(), r, pb.val.data(), r,
               1.0, pa.grad.data(), q);
        }
        if (pb.requires_grad) {
          pb.ensure_grad();
          gemm(true, false, q, r, p, 1.0, pa.val.data(), q, n.grad.data(), r,
               1.0, pb.grad.data(), r);
        }
      });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.values()[i] > 0.0 ? a.values()[i] : 0.0;
  return detail::make_node(a.shape(), std::move(out), {a},
                           [](Tensor::Node& n) {
                             auto& pa = *n.parents[0];
                             if (!pa.requires_grad) return;
                             pa.ensure_grad();
                             for (std::size_t i = 0; i < n.grad.size(); ++i)
                               if (pa.val[i] > 0.0) pa.grad[i] += n.grad[i];
                           });
}

Tensor silu(const Tensor& a) {
  std::vector<double> out(a.numel());
  std::vector<double> sig(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    sig[i] = sigmoid(a.values()[i]);
    out[i] = a.values()[i] * sig[i];
  }
  return detail::make_node(
      a.shape(), std::move(out), {a},
      [sig = std::move(sig)](Tensor::Node& n) {
        auto& pa = *n.parents[0];
        if (!pa.requires_grad) return;
        pa.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          double s = sig[i];
          pa.grad[i] += n.grad[i] * (s + pa.val[i] * s * (1.0 - s));
        }
      });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw std::invalid_argument("reshape: cannot view " +
                                shape_str(a.shape()) + " as " +
                                shape_str(shape));
  }
  return detail::make_node(std::move(shape), a.values(), {a},
                           [](Tensor::Node& n) {
                             auto& pa = *n.parents[0];
                             if (!pa.requires_grad) return;
                             pa.ensure_grad();
                             for (std::size_t i = 0; i < n.grad.size(); ++i)
                               pa.grad[i] += n.grad[i];
                           });
}

Tensor transpose2d(const Tensor& a) {
  if (a.ndim() != 2) {
    throw std::invalid_argument("transpose2d: expected 2-D tensor, got " +
                                shape_str(a.shape()));
  }
  std::size_t rows = a.dim(0), cols = a.dim(1);
  std::vector<double> out(a.numel());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      out[c * rows + r] = a.values()[r * cols + c];
  return detail::make_node({cols, rows}, std::move(out), {a},
                           [rows, cols](Tensor::Node& n) {
                             auto& pa = *n.parents[0];
                             if (!pa.requires_grad) return;
                             pa.ensure_grad();
                             for (std::size_t r = 0; r < rows; ++r)
                               for (std::size_t c = 0; c < cols; ++c)
                                 pa.grad[r * cols + c] += n.grad[c * rows + r];
                           });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const Shape& s0 = parts[0].shape();
  if (axis >= s0.size())
    throw std::invalid_argument("concat: axis out of range");
  Shape out_shape = s0;
  std::size_t axis_total = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != s0.size())
      throw std::invalid_argument("concat: rank mismatch");
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis && s[d] != s0[d]) {
        throw std::invalid_argument("concat: shape mismatch " + shape_str(s) +
                                    " vs " + shape_str(s0) + " on axis " +
                                    std::to_string(d));
      }
    }
    axis_total += s[axis];
  }
  out_shape[axis] = axis_total;

  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= s0[d];
  for (std::size_t d = axis + 1; d < s0.size(); ++d) inner *= s0[d];

  std::vector<double> out(shape_numel(out_shape));
  std::size_t offset = 0;
  std::vector<std::size_t> part_axis(parts.size());
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    std::size_t ax = parts[pi].shape()[axis];
    part_axis[pi] = ax;
    const auto& src = parts[pi].values();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy(src.begin() + o * ax * inner,
                src.begin() + (o + 1) * ax * inner,
                out.begin() + (o * axis_total + offset) * inner);
    }
    offset += ax;
  }
  return detail::make_node(
      std::move(out_shape), std::move(out),
      std::vector<Tensor>(parts.begin(), parts.end()),
      [outer, inner, axis_total, part_axis](Tensor::Node& n) {
        std::size_t offset = 0;
        for (std::size_t pi = 0; pi < n.parents.size(); ++pi) {
          std::size_t ax = part_axis[pi];
          auto& par = *n.parents[pi];
          if (par.requires_grad) {
            par.ensure_grad();
            for (std::size_t o = 0; o < outer; ++o)
              for (std::size_t i = 0; i < ax * inner; ++i)
                par.grad[o * ax * inner + i] +=
                    n.grad[(o * axis_total + offset) * inner + i];
          }
          offset += ax;
        }
      });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  return detail::make_node({1}, {total}, {a}, [](Tensor::Node& n) {
    auto& pa = *n.parents[0];
    if (!pa.requires_grad) return;
    pa.ensure_grad();
    for (double& g : pa.grad) g += n.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  double inv = 1.0 / static_cast<double>(a.numel());
  return detail::make_node({1}, {total * inv}, {a}, [inv](Tensor::Node& n) {
    auto& pa = *n.parents[0];
    if (!pa.requires_grad) return;
    pa.ensure_grad();
    for (double& g : pa.grad) g += n.grad[0] * inv;
  });
}

Tensor mean_axis1(const Tensor& a) {
  if (a.ndim() != 3) {
    throw std::invalid_argument("mean_axis1: expected 3-D tensor, got " +
                                shape_str(a.shape()));
  }
  std::size_t B = a.dim(0), M = a.dim(1), D = a.dim(2);
  if (M == 0) throw std::invalid_argument("mean_axis1: empty middle axis");
  std::vector<double> out(B * D, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t d = 0; d < D; ++d)
        out[b * D + d] += a.values()[(b * M + m) * D + d];
  double inv = 1.0 / static_cast<double>(M);
  for (double& v : out) v *= inv;
  return detail::make_node({B, D}, std::move(out), {a},
                           [B, M, D, inv](Tensor::Node& n) {
                             auto& pa = *n.parents[0];
                             if (!pa.requires_grad) return;
                             pa.ensure_grad();
                             for (std::size_t b = 0; b < B; ++b)
                               for (std::size_t m = 0; m < M; ++m)
                                 for (std::size_t d = 0; d < D; ++d)
                                   pa.grad[(b * M + m) * D + d] +=
                                       n.grad[b * D + d] * inv;
                           });
}

Tensor softmax(const Tensor& a) {
  if (a.ndim() == 0) throw std::invalid_argument("softmax: empty tensor");
  std::size_t k = a.shape().back();
  std::size_t rows = a.numel() / k;
  std::vector<double> out(a.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = a.values().data() + r * k;
    double* y = out.data() + r * k;
    double mx = *std::max_element(x, x + k);
    double z = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      y[i] = std::exp(x[i] - mx);
      z += y[i];
    }
    for (std::size_t i = 0; i < k; ++i) y[i] /= z;
  }
  std::vector<double> saved = out;
  return detail::make_node(
      a.shape(), std::move(out), {a},
      [k, rows, saved = std::move(saved)](Tensor::Node& n) {
        auto& pa = *n.parents[0];
        if (!pa.requires_grad) return;
        pa.ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          const double* s = saved.data() + r * k;
          const double* dy = n.grad.data() + r * k;
          double dot = 0.0;
          for (std::size_t i = 0; i < k; ++i) dot += dy[i] * s[i];
          for (std::size_t i = 0; i < k; ++i)
            pa.grad[r * k + i] += s[i] * (dy[i] - dot);
        }
      });
}

Tensor dropout(const Tensor& a, double p, bool train, std::mt19937_64& rng) {
  if (p < 0.0 || p >= 1.0)
    throw std::invalid_argument("dropout: p must be in [0, 1)");
  if (!train || p == 0.0) {
    // Identity pass-through keeps the graph uniform between modes.
    return scale(a, 1.0);
  }
  // Raw 64-bit threshold comparison: one generator call per element, much
  // cheaper than std::bernoulli_distribution on the training hot path.
  const std::uint64_t drop_threshold =
      static_cast<std::uint64_t>(p * 18446744073709551616.0);
  double inv_keep = 1.0 / (1.0 - p);
  std::vector<double> mask(a.numel());
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = rng() < drop_threshold ? 0.0 : inv_keep;
    out[i] = a.values()[i] * mask[i];
  }
  return detail::make_node(a.shape(), std::move(out), {a},
                           [mask = std::move(mask)](Tensor::Node& n) {
                             auto& pa = *n.parents[0];
                             if (!pa.requires_grad) return;
                             pa.ensure_grad();
                             for (std::size_t i = 0; i < n.grad.size(); ++i)
                               pa.grad[i] += n.grad[i] * mask[i];
                           });
}

Tensor embedding_lookup(const Tensor& table,
                        const std::vector<std::size_t>& ids) {
  if (table.ndim() != 2)
    throw std::invalid_argument("embedding_lookup: table must be 2-D");
  std::size_t V = table.dim(0), d = table.dim(1);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= V) {
      throw std::out_of_range("embedding_lookup: id " + std::to_string(ids[i]) +
                              " at position " + std::to_string(i) +
                              " out of range [0, " + std::to_string(V) + ")");
    }
  }
  std::vector<double> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::copy(table.values().begin() + ids[i] * d,
              table.values().begin() + (ids[i] + 1) * d, out.begin() + i * d);
  return detail::make_node({ids.size(), d}, std::move(out), {table},
                           [ids, d](Tensor::Node& n) {
                             auto& pt = *n.parents[0];
                             if (!pt.requires_grad) return;
                             pt.ensure_grad();
                             for (std::size_t i = 0; i < ids.size(); ++i)
                               for (std::size_t j = 0; j < d; ++j)
                                 pt.grad[ids[i] * d + j] += n.grad[i * d + j];
                           });
}

BNState BNState::init(std::size_t n, double eps, double momentum) {
  BNState s;
  s.gamma = Tensor::full({n}, 1.0).set_requires_grad(true);
  s.beta = Tensor::zeros({n}).set_requires_grad(true);
  s.running_mean.assign(n, 0.0);
  s.running_var.assign(n, 1.0);
  s.eps = eps;
  s.momentum = momentum;
  return s;
}

Tensor batch_norm(const Tensor& x, BNState& state, bool train) {
  if (x.ndim() != 2)
    throw std::invalid_argument("batch_norm: expected 2-D input, got " +
                                shape_str(x.shape()));
  std::size_t B = x.dim(0), n = x.dim(1);
  if (n != state.gamma.numel())
    throw std::invalid_argument("batch_norm: feature count mismatch");
  if (train && B < 2) {
    throw std::invalid_argument("batch_norm: train mode needs batch size >= 2, got " +
                                std::to_string(B));
  }
  std::vector<double> mu(n, 0.0), var(n, 0.0);
  if (train) {
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t j = 0; j < n; ++j) mu[j] += x.values()[b * n + j];
    for (std::size_t j = 0; j < n; ++j) mu[j] /= static_cast<double>(B);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t j = 0; j < n; ++j) {
        double d = x.values()[b * n + j] - mu[j];
        var[j] += d * d;
      }
    for (std::size_t j = 0; j < n; ++j) var[j] /= static_cast<double>(B);
    for (std::size_t j = 0; j < n; ++j) {
      state.running_mean[j] = (1.0 - state.momentum) * state.running_mean[j] +
                              state.momentum * mu[j];
      state.running_var[j] = (1.0 - state.momentum) * state.running_var[j] +
                             state.momentum * var[j];
    }
  } else {
    mu = state.running_mean;
    var = state.running_var;
  }

  double eps = state.eps;
  std::vector<double> xhat(B * n), out(B * n);
  std::vector<double> inv_std(n);
  for (std::size_t j = 0; j < n; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + eps);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t j = 0; j < n; ++j) {
      xhat[b * n + j] = (x.values()[b * n + j] - mu[j]) * inv_std[j];
      out[b * n + j] = state.gamma.values()[j] * xhat[b * n + j] +
                       state.beta.values()[j];
    }

  return detail::make_node(
      x.shape(), std::move(out), {x, state.gamma, state.beta},
      [B, n, train, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Tensor::Node& nd) {
        auto& px = *nd.parents[0];
        auto& pg = *nd.parents[1];
        auto& pb = *nd.parents[2];
        std::vector<double> dgamma(n, 0.0), dbeta(n, 0.0);
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t j = 0; j < n; ++j) {
            dgamma[j] += nd.grad[b * n + j] * xhat[b * n + j];
            dbeta[j] += nd.grad[b * n + j];
          }
        if (pg.requires_grad) {
          pg.ensure_grad();
          for (std::size_t j = 0; j < n; ++j) pg.grad[j] += dgamma[j];
        }
        if (pb.requires_grad) {
          pb.ensure_grad();
          for (std::size_t j = 0; j < n; ++j) pb.grad[j] += dbeta[j];
        }
        if (px.requires_grad) {
          px.ensure_grad();
          double invB = 1.0 / static_cast<double>(B);
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t j = 0; j < n; ++j) {
              double g = pg.val[j] * inv_std[j];
              double dy = nd.grad[b * n + j];
              if (train) {
                // batch statistics participate in the forward pass
                px.grad[b * n + j] +=
                    g * (dy - dbeta[j] * invB -
                         xhat[b * n + j] * dgamma[j] * invB);
              } else {
                px.grad[b * n + j] += g * dy;
              }
            }
        }
      });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  if (x.ndim() != 2)
    throw std::invalid_argument("layer_norm: expected 2-D input, got " +
                                shape_str(x.shape()));
  std::size_t B = x.dim(0), n = x.dim(1);
  if (gamma.numel() != n || beta.numel() != n)
    throw std::invalid_argument("layer_norm: affine size mismatch");
  std::vector<double> xhat(B * n), out(B * n), inv_std(B);
  for (std::size_t b = 0; b < B; ++b) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += x.values()[b * n + j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double d = x.values()[b * n + j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    inv_std[b] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[b * n + j] = (x.values()[b * n + j] - mu) * inv_std[b];
      out[b * n + j] = gamma.values()[j] * xhat[b * n + j] + beta.values()[j];
    }
  }
  return detail::make_node(
      x.shape(), std::move(out), {x, gamma, beta},
      [B, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Tensor::Node& nd) {
        auto& px = *nd.parents[0];
        auto& pg = *nd.parents[1];
        auto& pb = *nd.parents[2];
        if (pg.requires_grad) {
          pg.ensure_grad();
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t j = 0; j < n; ++j)
              pg.grad[j] += nd.grad[b * n + j] * xhat[b * n + j];
        }
        if (pb.requires_grad) {
          pb.ensure_grad();
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t j = 0; j < n; ++j)
              pb.grad[j] += nd.grad[b * n + j];
        }
        if (px.requires_grad) {
          px.ensure_grad();
          double invn = 1.0 / static_cast<double>(n);
          for (std::size_t b = 0; b < B; ++b) {
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              double dy = nd.grad[b * n + j] * pg.val[j];
              sum_dy += dy;
              sum_dy_xhat += dy * xhat[b * n + j];
            }
            for (std::size_t j = 0; j < n; ++j) {
              double dy = nd.grad[b * n + j] * pg.val[j];
              px.grad[b * n + j] +=
                  inv_std[b] * (dy - sum_dy * invn -
                                xhat[b * n + j] * sum_dy_xhat * invn);
            }
          }
        }
      });
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (q.ndim() != 4 || q.shape() != k.shape() || q.shape() != v.shape()) {
    throw std::invalid_argument("attention: q/k/v must share a B x h x T x dk shape");
  }
  std::size_t B = q.dim(0), H = q.dim(1), T = q.dim(2), dk = q.dim(3);
  std::size_t slices = B * H;
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<double> weights(slices * T * T);
  std::vector<double> out(q.numel());
  for (std::size_t s = 0; s < slices; ++s) {
    const double* qs = q.values().data() + s * T * dk;
    const double* ks = k.values().data() + s * T * dk;
    const double* vs = v.values().data() + s * T * dk;
    double* w = weights.data() + s * T * T;
    gemm(false, true, T, T, dk, inv_sqrt, qs, dk, ks, dk, 0.0, w, T);
    for (std::size_t r = 0; r < T; ++r) {
      double* row = w + r * T;
      double mx = *std::max_element(row, row + T);
      double z = 0.0;
      for (std::size_t c = 0; c < T; ++c) {
        row[c] = std::exp(row[c] - mx);
        z += row[c];
      }
      for (std::size_t c = 0; c < T; ++c) row[c] /= z;
    }
    gemm(false, false, T, dk, T, 1.0, w, T, vs, dk, 0.0,
         out.data() + s * T * dk, dk);
  }
  return detail::make_node(
      q.shape(), std::move(out), {q, k, v},
      [slices, T, dk, inv_sqrt, weights = std::move(weights)](
          Tensor::Node& nd) {
        auto& pq = *nd.parents[0];
        auto& pk = *nd.parents[1];
        auto& pv = *nd.parents[2];
        pq.ensure_grad();
        pk.ensure_grad();
        pv.ensure_grad();
        std::vector<double> dw(T * T), ds(T * T);
        for (std::size_t s = 0; s < slices; ++s) {
          const double* w = weights.data() + s * T * T;
          const double* dout = nd.grad.data() + s * T * dk;
          const double* qs = pq.val.data() + s * T * dk;
          const double* ks = pk.val.data() + s * T * dk;
          const double* vs = pv.val.data() + s * T * dk;
          // dV = W^T dOut
          if (pv.requires_grad)
            gemm(true, false, T, dk, T, 1.0, w, T, dout, dk, 1.0,
                 pv.grad.data() + s * T * dk, dk);
          // dW = dOut V^T, then softmax backward row-wise into dS
          gemm(false, true, T, T, dk, 1.0, dout, dk, vs, dk, 0.0, dw.data(),
               T);
          for (std::size_t r = 0; r < T; ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < T; ++c)
              dot += dw[r * T + c] * w[r * T + c];
            for (std::size_t c = 0; c < T; ++c)
              ds[r * T + c] = w[r * T + c] * (dw[r * T + c] - dot);
          }
          if (pq.requires_grad)
            gemm(false, false, T, dk, T, inv_sqrt, ds.data(), T, ks, dk, 1.0,
                 pq.grad.data() + s * T * dk, dk);
          if (pk.requires_grad)
            gemm(true, false, T, dk, T, inv_sqrt, ds.data(), T, qs, dk, 1.0,
                 pk.grad.data() + s * T * dk, dk);
        }
      });
}

Tensor cross_entropy_with_logits(const Tensor& logits,
                                 const std::vector<std::size_t>& targets) {
  if (logits.ndim() != 2)
    throw std::invalid_argument("cross_entropy_with_logits: logits must be B x C");
  std::size_t B = logits.dim(0), C = logits.dim(1);
  if (targets.size() != B)
    throw std::invalid_argument("cross_entropy_with_logits: target count mismatch");
  for (std::size_t b = 0; b < B; ++b) {
    if (targets[b] >= C) {
      throw std::out_of_range("cross_entropy_with_logits: label " +
                              std::to_string(targets[b]) + " at row " +
                              std::to_string(b) + " out of range [0, " +
                              std::to_string(C) + ")");
    }
  }
  std::vector<double> probs(B * C);
  double loss = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const double* z = logits.values().data() + b * C;
    double mx = *std::max_element(z, z + C);
    double lse = 0.0;
    for (std::size_t c = 0; c < C; ++c) lse += std::exp(z[c] - mx);
    lse = mx + std::log(lse);
    for (std::size_t c = 0; c < C; ++c) probs[b * C + c] = std::exp(z[c] - lse);
    loss += lse - z[targets[b]];
  }
  loss /= static_cast<double>(B);
  return detail::make_node(
      {1}, {loss}, {logits},
      [B, C, targets, probs = std::move(probs)](Tensor::Node& nd) {
        auto& pl = *nd.parents[0];
        if (!pl.requires_grad) return;
        pl.ensure_grad();
        double g = nd.grad[0] / static_cast<double>(B);
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t c = 0; c < C; ++c)
            pl.grad[b * C + c] +=
                g * (probs[b * C + c] - (targets[b] == c ? 1.0 : 0.0));
      });
}

Tensor binary_cross_entropy_with_logits(const Tensor& logits,
                                        const std::vector<double>& targets) {
  if (logits.numel() != targets.size())
    throw std::invalid_argument("binary_cross_entropy_with_logits: size mismatch");
  std::size_t N = targets.size();
  double loss = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    double z = logits.values()[i];
    loss += softplus(z) - targets[i] * z;
  }
  loss /= static_cast<double>(N);
  return detail::make_node({1}, {loss}, {logits},
                           [targets](Tensor::Node& nd) {
                             auto& pl = *nd.parents[0];
                             if (!pl.requires_grad) return;
                             pl.ensure_grad();
                             double g = nd.grad[0] / static_cast<double>(targets.size());
                             for (std::size_t i = 0; i < targets.size(); ++i)
                               pl.grad[i] +=
                                   g * (sigmoid(pl.val[i]) - targets[i]);
                           });
}

Tensor mse_loss(const Tensor& pred, const std::vector<double>& targets) {
  if (pred.numel() != targets.size())
    throw std::invalid_argument("mse_loss: size mismatch");
  std::size_t N = targets.size();
  double loss = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    double d = pred.values()[i] - targets[i];
    loss += d * d;
  }
  loss /= static_cast<double>(N);
  return detail::make_node({1}, {loss}, {pred},
                           [targets](Tensor::Node& nd) {
                             auto& pp = *nd.parents[0];
                             if (!pp.requires_grad) return;
                             pp.ensure_grad();
                             double g = 2.0 * nd.grad[0] /
                                        static_cast<double>(targets.size());
                             for (std::size_t i = 0; i < targets.size(); ++i)
                               pp.grad[i] += g * (pp.val[i] - targets[i]);
                           });
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                  double step) {
  if (step <= 0.0) throw std::invalid_argument("grad_check: step must be > 0");
  x.set_requires_grad(true);
  x.zero_grad();
  Tensor y = f(x);
  if (!std::isfinite(y.item()))
    throw std::runtime_error("grad_check: f(x) is not finite");
  backward(y);
  std::vector<double> analytic = x.grad();

  double max_rel = 0.0;
  NoGradGuard ng;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    double orig = x.values()[i];
    x.values()[i] = orig + step;
    double up = f(x).item();
    x.values()[i] = orig - step;
    double dn = f(x).item();
    x.values()[i] = orig;
    double numeric = (up - dn) / (2.0 * step);
    double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric), 1e-8});
    max_rel = std::max(max_rel, std::fabs(analytic[i] - numeric) / denom);
  }
  return max_rel;
}

}  // namespace tabkanet
