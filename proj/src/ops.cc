// Copyright 2026 The wsvad Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "wsvad/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "wsvad/errors.h"

WSVAD_NAMESPACE_BEGIN

namespace {

using detail::make_result;
using detail::Node;

void require_2d(const Tensor& t, const char* op) {
  if (t.ndim() != 2) {
    throw DimensionError(std::string(op) + ": expected 2-D tensor, got " +
                         shape_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

void require_scalar(const Tensor& t, const char* op) {
  if (t.numel() != 1) {
    throw DimensionError(std::string(op) + ": expected single-element tensor, got " +
                         shape_string(t.shape()));
  }
}

bool wants_grad(const Node& n) { return n.requires_grad && !n.grad.empty(); }

// Pointwise map with derivative expressed through input x and output y.
template <typename F, typename DF>
Tensor pointwise(const Tensor& x, F f, DF df) {
  std::vector<Real> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return make_result(x.shape(), std::move(out), {x}, [df](Node& self) {
    Node& a = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      a.grad[i] += self.grad[i] * df(a.value[i], self.value[i]);
    }
  });
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner extents differ, " + shape_string(a.shape()) +
                         " x " + shape_string(b.shape()));
  }
  std::vector<Real> out(m * n, Real{0});
  const auto A = a.data();
  const auto B = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    Real* c = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Real av = A[i * k + p];
      if (av == Real{0}) continue;
      const Real* brow = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
    }
  }
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& an = *self.inputs[0];
    Node& bn = *self.inputs[1];
    const Real* G = self.grad.data();
    if (wants_grad(an)) {
      // dA = G * B^T
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const Real* brow = bn.value.data() + p * n;
          const Real* grow = G + i * n;
          Real acc = 0;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          an.grad[i * k + p] += acc;
        }
      }
    }
    if (wants_grad(bn)) {
      // dB = A^T * G
      for (std::size_t i = 0; i < m; ++i) {
        const Real* grow = G + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const Real av = an.value[i * k + p];
          if (av == Real{0}) continue;
          Real* dst = bn.grad.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) dst[j] += av * grow[j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_2d(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<Real> out(m * n);
  const auto A = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = A[i * n + j];
  return make_result({n, m}, std::move(out), {a}, [m, n](Node& self) {
    Node& an = *self.inputs[0];
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) an.grad[i * n + j] += self.grad[j * m + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<Real> out(a.numel());
  const auto A = a.data();
  const auto B = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + B[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (auto& in : self.inputs) {
      if (!wants_grad(*in)) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) in->grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<Real> out(a.numel());
  const auto A = a.data();
  const auto B = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] - B[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& an = *self.inputs[0];
    Node& bn = *self.inputs[1];
    if (wants_grad(an))
      for (std::size_t i = 0; i < self.grad.size(); ++i) an.grad[i] += self.grad[i];
    if (wants_grad(bn))
      for (std::size_t i = 0; i < self.grad.size(); ++i) bn.grad[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<Real> out(a.numel());
  const auto A = a.data();
  const auto B = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * B[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& an = *self.inputs[0];
    Node& bn = *self.inputs[1];
    if (wants_grad(an))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        an.grad[i] += self.grad[i] * bn.value[i];
    if (wants_grad(bn))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        bn.grad[i] += self.grad[i] * an.value[i];
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_2d(x, "add_bias");
  const std::size_t m = x.rows(), n = x.cols();
  if (bias.numel() != n) {
    throw DimensionError("add_bias: bias " + shape_string(bias.shape()) +
                         " does not match " + shape_string(x.shape()));
  }
  std::vector<Real> out(x.data().begin(), x.data().end());
  const auto b = bias.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += b[j];
  return make_result(x.shape(), std::move(out), {x, bias}, [m, n](Node& self) {
    Node& xn = *self.inputs[0];
    Node& bn = *self.inputs[1];
    if (wants_grad(xn))
      for (std::size_t i = 0; i < self.grad.size(); ++i) xn.grad[i] += self.grad[i];
    if (wants_grad(bn))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) bn.grad[j] += self.grad[i * n + j];
  });
}

Tensor affine(const Tensor& x, Real scale, Real shift) {
  return pointwise(
      x, [scale, shift](Real v) { return scale * v + shift; },
      [scale](Real, Real) { return scale; });
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
  require_scalar(s, "scale_by");
  const Real sv = s.data()[0];
  std::vector<Real> out(x.numel());
  const auto X = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = X[i] * sv;
  return make_result(x.shape(), std::move(out), {x, s}, [sv](Node& self) {
    Node& xn = *self.inputs[0];
    Node& sn = *self.inputs[1];
    if (wants_grad(xn))
      for (std::size_t i = 0; i < self.grad.size(); ++i) xn.grad[i] += self.grad[i] * sv;
    if (wants_grad(sn)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        acc += static_cast<double>(self.grad[i]) * xn.value[i];
      sn.grad[0] += static_cast<Real>(acc);
    }
  });
}

Tensor mul_rows(const Tensor& x, const Tensor& column) {
  require_2d(x, "mul_rows");
  const std::size_t m = x.rows(), n = x.cols();
  if (column.numel() != m) {
    throw DimensionError("mul_rows: column " + shape_string(column.shape()) +
                         " does not match rows of " + shape_string(x.shape()));
  }
  std::vector<Real> out(m * n);
  const auto X = x.data();
  const auto c = column.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = X[i * n + j] * c[i];
  return make_result(x.shape(), std::move(out), {x, column}, [m, n](Node& self) {
    Node& xn = *self.inputs[0];
    Node& cn = *self.inputs[1];
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const Real g = self.grad[i * n + j];
        if (wants_grad(xn)) xn.grad[i * n + j] += g * cn.value[i];
        acc += static_cast<double>(g) * xn.value[i * n + j];
      }
      if (wants_grad(cn)) cn.grad[i] += static_cast<Real>(acc);
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  return pointwise(
      x,
      [](Real v) {
        // Split by sign so exp never overflows.
        if (v >= 0) return Real{1} / (Real{1} + std::exp(-v));
        const Real e = std::exp(v);
        return e / (Real{1} + e);
      },
      [](Real, Real y) { return y * (Real{1} - y); });
}

Tensor relu(const Tensor& x) {
  return pointwise(
      x, [](Real v) { return v > 0 ? v : Real{0}; },
      [](Real v, Real) { return v > 0 ? Real{1} : Real{0}; });
}

Tensor gelu(const Tensor& x) {
  return pointwise(
      x, [](Real v) { return static_cast<Real>(v * normal_cdf(v)); },
      [](Real v, Real) {
        return static_cast<Real>(normal_cdf(v) + v * normal_pdf(v));
      });
}

Tensor exp(const Tensor& x) {
  return pointwise(
      x, [](Real v) { return std::exp(v); }, [](Real, Real y) { return y; });
}

Tensor softmax_rows(const Tensor& x, std::optional<std::size_t> band_radius) {
  require_2d(x, "softmax_rows");
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<Real> out(m * n, Real{0});
  const auto X = x.data();
  auto range = [band_radius, n](std::size_t i) -> std::pair<std::size_t, std::size_t> {
    if (!band_radius) return {0, n};
    const std::size_t r = *band_radius;
    const std::size_t lo = i > r ? i - r : 0;
    const std::size_t hi = std::min(n, i + r + 1);
    return {std::min(lo, n), hi};
  };
  for (std::size_t i = 0; i < m; ++i) {
    const auto [lo, hi] = range(i);
    if (lo >= hi) continue;
    const Real* row = X.data() + i * n;
    Real mx = -std::numeric_limits<Real>::infinity();
    for (std::size_t j = lo; j < hi; ++j) mx = std::max(mx, row[j]);
    double total = 0.0;
    Real* o = out.data() + i * n;
    for (std::size_t j = lo; j < hi; ++j) {
      o[j] = std::exp(row[j] - mx);
      total += o[j];
    }
    const Real inv = static_cast<Real>(1.0 / total);
    for (std::size_t j = lo; j < hi; ++j) o[j] *= inv;
  }
  return make_result(x.shape(), std::move(out), {x}, [m, n, range](Node& self) {
    Node& xn = *self.inputs[0];
    for (std::size_t i = 0; i < m; ++i) {
      const auto [lo, hi] = range(i);
      const Real* y = self.value.data() + i * n;
      const Real* g = self.grad.data() + i * n;
      double dot = 0.0;
      for (std::size_t j = lo; j < hi; ++j) dot += static_cast<double>(g[j]) * y[j];
      for (std::size_t j = lo; j < hi; ++j)
        xn.grad[i * n + j] += y[j] * (g[j] - static_cast<Real>(dot));
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, Real eps) {
  require_2d(x, "layer_norm");
  const std::size_t m = x.rows(), n = x.cols();
  if (n == 0) throw DimensionError("layer_norm: rows must have at least one entry");
  if (gain.numel() != n || bias.numel() != n) {
    throw DimensionError("layer_norm: gain/bias must have " + std::to_string(n) +
                         " entries");
  }
  std::vector<Real> xhat(m * n);
  std::vector<Real> rstd(m);
  std::vector<Real> out(m * n);
  const auto X = x.data();
  const auto g = gain.data();
  const auto b = bias.data();
  for (std::size_t i = 0; i < m; ++i) {
    const Real* row = X.data() + i * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    const double r = 1.0 / std::sqrt(var + eps);
    rstd[i] = static_cast<Real>(r);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = static_cast<Real>((row[j] - mu) * r);
      out[i * n + j] = g[j] * xhat[i * n + j] + b[j];
    }
  }
  return make_result(
      x.shape(), std::move(out), {x, gain, bias},
      [m, n, xhat = std::move(xhat), rstd = std::move(rstd)](Node& self) {
        Node& xn = *self.inputs[0];
        Node& gn = *self.inputs[1];
        Node& bn = *self.inputs[2];
        for (std::size_t i = 0; i < m; ++i) {
          const Real* gy = self.grad.data() + i * n;
          const Real* xh = xhat.data() + i * n;
          if (wants_grad(gn))
            for (std::size_t j = 0; j < n; ++j) gn.grad[j] += gy[j] * xh[j];
          if (wants_grad(bn))
            for (std::size_t j = 0; j < n; ++j) bn.grad[j] += gy[j];
          if (wants_grad(xn)) {
            double mean_d = 0.0, mean_dx = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double d = static_cast<double>(gy[j]) * gn.value[j];
              mean_d += d;
              mean_dx += d * xh[j];
            }
            mean_d /= static_cast<double>(n);
            mean_dx /= static_cast<double>(n);
            for (std::size_t j = 0; j < n; ++j) {
              const double d = static_cast<double>(gy[j]) * gn.value[j];
              xn.grad[i * n + j] +=
                  static_cast<Real>(rstd[i] * (d - mean_d - xh[j] * mean_dx));
            }
          }
        }
      });
}

Tensor l2_normalize_rows(const Tensor& x, Real eps) {
  require_2d(x, "l2_normalize_rows");
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<Real> out(m * n);
  std::vector<Real> denom(m);
  std::vector<char> clipped(m, 0);
  const auto X = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < n; ++j) ss += static_cast<double>(X[i * n + j]) * X[i * n + j];
    double norm = std::sqrt(ss);
    if (norm < eps) {
      norm = eps;
      clipped[i] = 1;
    }
    denom[i] = static_cast<Real>(norm);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = static_cast<Real>(X[i * n + j] / norm);
  }
  return make_result(x.shape(), std::move(out), {x},
                     [m, n, denom = std::move(denom), clipped = std::move(clipped)](Node& self) {
                       Node& xn = *self.inputs[0];
                       for (std::size_t i = 0; i < m; ++i) {
                         const Real* g = self.grad.data() + i * n;
                         const Real* y = self.value.data() + i * n;
                         if (clipped[i]) {
                           for (std::size_t j = 0; j < n; ++j)
                             xn.grad[i * n + j] += g[j] / denom[i];
                           continue;
                         }
                         double dot = 0.0;
                         for (std::size_t j = 0; j < n; ++j) dot += static_cast<double>(g[j]) * y[j];
                         for (std::size_t j = 0; j < n; ++j)
                           xn.grad[i * n + j] +=
                               static_cast<Real>((g[j] - y[j] * dot) / denom[i]);
                       }
                     });
}

Tensor row_norms(const Tensor& x) {
  require_2d(x, "row_norms");
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<Real> out(m);
  const auto X = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < n; ++j) ss += static_cast<double>(X[i * n + j]) * X[i * n + j];
    out[i] = static_cast<Real>(std::sqrt(ss));
  }
  return make_result({m, 1}, std::move(out), {x}, [m, n](Node& self) {
    Node& xn = *self.inputs[0];
    for (std::size_t i = 0; i < m; ++i) {
      const Real norm = self.value[i];
      if (norm == Real{0}) continue;  // subgradient 0 at the origin
      for (std::size_t j = 0; j < n; ++j)
        xn.grad[i * n + j] += self.grad[i] * xn.value[i * n + j] / norm;
    }
  });
}

Tensor row_mean(const Tensor& x) {
  require_2d(x, "row_mean");
  const std::size_t m = x.rows(), n = x.cols();
  if (n == 0) throw DimensionError("row_mean: empty rows");
  std::vector<Real> out(m);
  const auto X = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += X[i * n + j];
    out[i] = static_cast<Real>(s / static_cast<double>(n));
  }
  return make_result({m, 1}, std::move(out), {x}, [m, n](Node& self) {
    Node& xn = *self.inputs[0];
    const Real inv = Real{1} / static_cast<Real>(n);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) xn.grad[i * n + j] += self.grad[i] * inv;
  });
}

Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias, bool causal) {
  require_2d(x, "conv1d");
  if (kernel.ndim() != 3) {
    throw DimensionError("conv1d: kernel must be [k x D_in x D_out], got " +
                         shape_string(kernel.shape()));
  }
  const std::size_t T = x.rows(), din = x.cols();
  const std::size_t k = kernel.size(0), dout = kernel.size(2);
  if (k == 0) throw DimensionError("conv1d: kernel size must be at least 1");
  if (kernel.size(1) != din) {
    throw DimensionError("conv1d: kernel input width " + std::to_string(kernel.size(1)) +
                         " does not match input " + shape_string(x.shape()));
  }
  if (bias.defined() && bias.numel() != dout) {
    throw DimensionError("conv1d: bias must have " + std::to_string(dout) + " entries");
  }
  const std::ptrdiff_t left = causal ? static_cast<std::ptrdiff_t>(k - 1)
                                     : static_cast<std::ptrdiff_t>((k - 1) / 2);
  std::vector<Real> out(T * dout, Real{0});
  const auto X = x.data();
  const auto K = kernel.data();
  for (std::size_t t = 0; t < T; ++t) {
    Real* o = out.data() + t * dout;
    if (bias.defined())
      for (std::size_t c = 0; c < dout; ++c) o[c] = bias.data()[c];
    for (std::size_t j = 0; j < k; ++j) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) - left;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
      const Real* xrow = X.data() + static_cast<std::size_t>(src) * din;
      const Real* kj = K.data() + j * din * dout;
      for (std::size_t i = 0; i < din; ++i) {
        const Real xv = xrow[i];
        if (xv == Real{0}) continue;
        const Real* krow = kj + i * dout;
        for (std::size_t c = 0; c < dout; ++c) o[c] += xv * krow[c];
      }
    }
  }
  std::vector<Tensor> inputs = {x, kernel};
  if (bias.defined()) inputs.push_back(bias);
  return make_result({T, dout}, std::move(out), std::move(inputs),
                     [T, din, dout, k, left](Node& self) {
                       Node& xn = *self.inputs[0];
                       Node& kn = *self.inputs[1];
                       const bool has_bias = self.inputs.size() > 2;
                       for (std::size_t t = 0; t < T; ++t) {
                         const Real* g = self.grad.data() + t * dout;
                         if (has_bias && wants_grad(*self.inputs[2]))
                           for (std::size_t c = 0; c < dout; ++c) self.inputs[2]->grad[c] += g[c];
                         for (std::size_t j = 0; j < k; ++j) {
                           const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) - left;
                           if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
                           const std::size_t s = static_cast<std::size_t>(src);
                           const Real* krow0 = kn.value.data() + j * din * dout;
                           for (std::size_t i = 0; i < din; ++i) {
                             const Real* krow = krow0 + i * dout;
                             if (wants_grad(xn)) {
                               Real acc = 0;
                               for (std::size_t c = 0; c < dout; ++c) acc += g[c] * krow[c];
                               xn.grad[s * din + i] += acc;
                             }
                             if (wants_grad(kn)) {
                               const Real xv = xn.value[s * din + i];
                               if (xv == Real{0}) continue;
                               Real* dk = kn.grad.data() + (j * din + i) * dout;
                               for (std::size_t c = 0; c < dout; ++c) dk[c] += xv * g[c];
                             }
                           }
                         }
                       }
                     });
}

Tensor dropout(const Tensor& x, Real p, bool training, Rng& rng) {
  if (!(p >= Real{0}) || p >= Real{1}) {
    throw ParameterError("dropout: probability must lie in [0, 1), got " +
                         std::to_string(p));
  }
  if (!training || p == Real{0}) return x;
  const Real keep_scale = Real{1} / (Real{1} - p);
  std::vector<Real> mask(x.numel());
  std::vector<Real> out(x.numel());
  const auto X = x.data();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = rng.uniform() < static_cast<double>(p) ? Real{0} : keep_scale;
    out[i] = X[i] * mask[i];
  }
  return make_result(x.shape(), std::move(out), {x}, [mask = std::move(mask)](Node& self) {
    Node& xn = *self.inputs[0];
    for (std::size_t i = 0; i < mask.size(); ++i) xn.grad[i] += self.grad[i] * mask[i];
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_cols: nothing to concatenate");
  const std::size_t m = parts.front().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    if (p.rows() != m) {
      throw DimensionError("concat_cols: row counts differ (" + std::to_string(m) +
                           " vs " + std::to_string(p.rows()) + ")");
    }
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<Real> out(m * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto P = parts[k].data();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(P.data() + i * widths[k], widths[k], out.data() + i * total + offset);
    offset += widths[k];
  }
  return make_result({m, total}, std::move(out), std::vector<Tensor>(parts.begin(), parts.end()),
                     [m, total, widths](Node& self) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < widths.size(); ++k) {
                         Node& in = *self.inputs[k];
                         if (wants_grad(in)) {
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t j = 0; j < widths[k]; ++j)
                               in.grad[i * widths[k] + j] += self.grad[i * total + off + j];
                         }
                         off += widths[k];
                       }
                     });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_2d(x, "slice_cols");
  const std::size_t m = x.rows(), n = x.cols();
  if (begin > end || end > n) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") outside " + shape_string(x.shape()));
  }
  const std::size_t w = end - begin;
  std::vector<Real> out(m * w);
  const auto X = x.data();
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(X.data() + i * n + begin, w, out.data() + i * w);
  return make_result({m, w}, std::move(out), {x}, [m, n, w, begin](Node& self) {
    Node& xn = *self.inputs[0];
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) xn.grad[i * n + begin + j] += self.grad[i * w + j];
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  require_2d(x, "gather_rows");
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<Real> out(rows.size() * n);
  const auto X = x.data();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= m) {
      throw DimensionError("gather_rows: row " + std::to_string(rows[r]) +
                           " out of range for " + shape_string(x.shape()));
    }
    std::copy_n(X.data() + rows[r] * n, n, out.data() + r * n);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_result({idx.size(), n}, std::move(out), {x}, [n, idx](Node& self) {
    Node& xn = *self.inputs[0];
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < n; ++j) xn.grad[idx[r] * n + j] += self.grad[r * n + j];
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (Real v : x.data()) s += v;
  return make_result({}, {static_cast<Real>(s)}, {x}, [](Node& self) {
    Node& xn = *self.inputs[0];
    for (Real& g : xn.grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ContractError("mean: empty tensor");
  const double n = static_cast<double>(x.numel());
  double s = 0.0;
  for (Real v : x.data()) s += v;
  return make_result({}, {static_cast<Real>(s / n)}, {x}, [n](Node& self) {
    Node& xn = *self.inputs[0];
    const Real g = static_cast<Real>(self.grad[0] / n);
    for (Real& dst : xn.grad) dst += g;
  });
}

Tensor sum_scalars(std::span<const Tensor> scalars) {
  double s = 0.0;
  for (const Tensor& t : scalars) {
    require_scalar(t, "sum_scalars");
    s += t.data()[0];
  }
  return make_result({}, {static_cast<Real>(s)}, std::vector<Tensor>(scalars.begin(), scalars.end()),
                     [](Node& self) {
                       for (auto& in : self.inputs)
                         if (wants_grad(*in)) in->grad[0] += self.grad[0];
                     });
}

std::vector<std::size_t> topk_indices(std::span<const Real> values, std::size_t k) {
  if (k > values.size()) {
    throw ContractError("top-k: k = " + std::to_string(k) + " exceeds " +
                        std::to_string(values.size()) + " values");
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  order.resize(k);
  return order;
}

Tensor topk_mean(const Tensor& x, std::size_t k) {
  if (k == 0) throw ContractError("topk_mean: k must be at least 1");
  std::vector<std::size_t> picked = topk_indices(x.data(), k);
  double s = 0.0;
  for (std::size_t i : picked) s += x.data()[i];
  return make_result({}, {static_cast<Real>(s / static_cast<double>(k))}, {x},
                     [picked = std::move(picked)](Node& self) {
                       Node& xn = *self.inputs[0];
                       const Real g = self.grad[0] / static_cast<Real>(picked.size());
                       for (std::size_t i : picked) xn.grad[i] += g;
                     });
}

Tensor bce(const Tensor& p, Real target, Real clamp_eps) {
  if (p.numel() == 0) throw ContractError("bce: empty tensor");
  const double lo = clamp_eps;
  const double hi = 1.0 - static_cast<double>(clamp_eps);
  const double t = target;
  const double n = static_cast<double>(p.numel());
  double total = 0.0;
  for (Real v : p.data()) {
    const double q = std::clamp(static_cast<double>(v), lo, hi);
    total -= t * std::log(q) + (1.0 - t) * std::log1p(-q);
  }
  return make_result({}, {static_cast<Real>(total / n)}, {p}, [lo, hi, t, n](Node& self) {
    Node& pn = *self.inputs[0];
    const double g = self.grad[0] / n;
    for (std::size_t i = 0; i < pn.value.size(); ++i) {
      const double v = pn.value[i];
      if (v < lo || v > hi) continue;  // clamped: flat
      pn.grad[i] += static_cast<Real>(g * (-t / v + (1.0 - t) / (1.0 - v)));
    }
  });
}

Tensor mse(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mse");
  if (a.numel() == 0) throw ContractError("mse: empty tensor");
  const double n = static_cast<double>(a.numel());
  double total = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = static_cast<double>(a.data()[i]) - b.data()[i];
    total += d * d;
  }
  return make_result({}, {static_cast<Real>(total / n)}, {a, b}, [n](Node& self) {
    Node& an = *self.inputs[0];
    Node& bn = *self.inputs[1];
    const double g = 2.0 * self.grad[0] / n;
    for (std::size_t i = 0; i < an.value.size(); ++i) {
      const Real d = static_cast<Real>(g * (static_cast<double>(an.value[i]) - bn.value[i]));
      if (wants_grad(an)) an.grad[i] += d;
      if (wants_grad(bn)) bn.grad[i] -= d;
    }
  });
}

WSVAD_NAMESPACE_END
