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

// Brute-force reference implementations used by the tests. Everything here
// works on plain row-major double vectors and shares no code with the
// library, so a bug has to be made twice to go unnoticed.

#ifndef WSVAD_TESTS_ORACLES_H_
#define WSVAD_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace oracle {

using Mat = std::vector<double>;  // row-major

inline Mat matmul(const Mat& a, const Mat& b, std::size_t m, std::size_t k, std::size_t n) {
  Mat c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) c[i * n + j] += a[i * k + p] * b[p * n + j];
  return c;
}

// x W + b with W [in x out].
inline Mat linear(const Mat& x, const Mat& w, const Mat& b, std::size_t rows, std::size_t in,
                  std::size_t out) {
  Mat y = matmul(x, w, rows, in, out);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < out; ++j) y[i * out + j] += b[j];
  return y;
}

// Sliding dot product with zero padding. `left` steps of padding precede x.
inline Mat conv1d(const Mat& x, const Mat& kernel, const Mat& bias, std::size_t T,
                  std::size_t din, std::size_t dout, std::size_t k, bool causal) {
  const std::ptrdiff_t left = causal ? std::ptrdiff_t(k) - 1 : (std::ptrdiff_t(k) - 1) / 2;
  Mat y(T * dout, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t o = 0; o < dout; ++o) {
      double acc = bias.empty() ? 0.0 : bias[o];
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t src = std::ptrdiff_t(t) - left + std::ptrdiff_t(j);
        if (src < 0 || src >= std::ptrdiff_t(T)) continue;
        for (std::size_t i = 0; i < din; ++i)
          acc += x[std::size_t(src) * din + i] * kernel[(j * din + i) * dout + o];
      }
      y[t * dout + o] = acc;
    }
  return y;
}

// softmax(q k^T / sqrt(d)) v, optionally restricted to |i - j| <= radius.
inline Mat attention(const Mat& q, const Mat& k, const Mat& v, std::size_t T, std::size_t d,
                     std::optional<std::size_t> radius = std::nullopt) {
  Mat out(T * d, 0.0);
  for (std::size_t i = 0; i < T; ++i) {
    std::vector<double> logit(T, -INFINITY);
    double top = -INFINITY;
    for (std::size_t j = 0; j < T; ++j) {
      const std::size_t dist = i > j ? i - j : j - i;
      if (radius && dist > *radius) continue;
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += q[i * d + c] * k[j * d + c];
      logit[j] = s / std::sqrt(double(d));
      top = std::max(top, logit[j]);
    }
    double z = 0.0;
    std::vector<double> w(T, 0.0);
    for (std::size_t j = 0; j < T; ++j)
      if (std::isfinite(logit[j])) z += (w[j] = std::exp(logit[j] - top));
    for (std::size_t j = 0; j < T; ++j)
      for (std::size_t c = 0; c < d; ++c) out[i * d + c] += w[j] / z * v[j * d + c];
  }
  return out;
}

// Columns [begin, end) of a [rows x cols] matrix.
inline Mat columns(const Mat& x, std::size_t rows, std::size_t cols, std::size_t begin,
                   std::size_t end) {
  Mat y;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = begin; j < end; ++j) y.push_back(x[i * cols + j]);
  return y;
}

// S = sigmoid(x slots^T / sqrt(D)), augmented = S slots.
struct MemoryRead {
  Mat scores;
  Mat augmented;
};

inline MemoryRead memory_read(const Mat& x, const Mat& slots, std::size_t T, std::size_t K,
                              std::size_t D) {
  MemoryRead r{Mat(T * K), Mat(T * D, 0.0)};
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t s = 0; s < K; ++s) {
      double dot = 0.0;
      for (std::size_t c = 0; c < D; ++c) dot += x[t * D + c] * slots[s * D + c];
      r.scores[t * K + s] = 1.0 / (1.0 + std::exp(-dot / std::sqrt(double(D))));
    }
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t s = 0; s < K; ++s)
      for (std::size_t c = 0; c < D; ++c)
        r.augmented[t * D + c] += r.scores[t * K + s] * slots[s * D + c];
  return r;
}

// Indices of the k largest values by full sort, ties to the lower index.
inline std::vector<std::size_t> topk(const std::vector<double>& v, std::size_t k) {
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return v[a] != v[b] ? v[a] > v[b] : a < b;
  });
  idx.resize(k);
  return idx;
}

// Fraction of (positive, negative) pairs ordered correctly, ties count 1/2.
inline double auc_pairs(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  double good = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      pairs += 1.0;
      good += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return good / pairs;
}

// Mean over positives of precision at their rank; descending score, ties in
// index order.
inline double ap_ranks(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  double total = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    ++positives;
    // Rank of i: items strictly above it, plus tied items with lower index.
    std::size_t rank = 1, hits = 1;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (j == i) continue;
      if (s[j] > s[i] || (s[j] == s[i] && j < i)) {
        ++rank;
        hits += y[j];
      }
    }
    total += double(hits) / double(rank);
  }
  return total / double(positives);
}

// Forward moving average truncated at the end of the series.
inline std::vector<double> smooth(const std::vector<double>& s, std::size_t kappa) {
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t j = i; j < std::min(i + kappa, s.size()); ++j, ++n) acc += s[j];
    out[i] = acc / double(n);
  }
  return out;
}

// Standard normal CDF by Simpson integration of the density, independent of
// std::erf.
inline double normal_cdf(double x) {
  const int n = 20000;
  const double a = 0.0, h = (x - a) / n;
  auto pdf = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI); };
  double acc = pdf(a) + pdf(x);
  for (int i = 1; i < n; ++i) acc += pdf(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return 0.5 + acc * h / 3.0;
}

}  // namespace oracle

#endif  // WSVAD_TESTS_ORACLES_H_
