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

// Differentiable layer primitives. Matrices are 2-D row-major tensors with
// time along the rows. Reductions accumulate in double.

#ifndef WSVAD_OPS_H_
#define WSVAD_OPS_H_

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "wsvad/config.h"
#include "wsvad/rng.h"
#include "wsvad/tensor.h"

WSVAD_NAMESPACE_BEGIN

// [m x k] * [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Same-shape elementwise arithmetic.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

// x [m x n] + bias [n], broadcast over rows.
Tensor add_bias(const Tensor& x, const Tensor& bias);
// scale * x + shift with constant coefficients.
Tensor affine(const Tensor& x, Real scale, Real shift = Real{0});
// x * s where s is a single-element tensor.
Tensor scale_by(const Tensor& x, const Tensor& s);
// Row i of x [m x n] multiplied by column[i], column being [m x 1].
Tensor mul_rows(const Tensor& x, const Tensor& column);

Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
// Exact form x * Phi(x) with Phi the standard normal CDF.
Tensor gelu(const Tensor& x);
Tensor exp(const Tensor& x);

// Row-wise softmax with max subtraction. With `band_radius` set, entries
// with |i - j| > radius are excluded (probability exactly zero).
Tensor softmax_rows(const Tensor& x,
                    std::optional<std::size_t> band_radius = std::nullopt);

// Per-row normalization to zero mean / unit variance, then gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  Real eps = Real{1e-5});

// Each row divided by max(||row||_2, eps).
Tensor l2_normalize_rows(const Tensor& x, Real eps = Real{1e-12});
// [m x n] -> [m x 1] row L2 norms.
Tensor row_norms(const Tensor& x);
// [m x n] -> [m x 1] row means.
Tensor row_mean(const Tensor& x);

// Temporal convolution. x is [T x D_in], kernel is [k x D_in x D_out], bias
// is [D_out] or undefined. The output keeps length T: causal mode pads k-1
// steps of the past, otherwise padding is split (k-1)/2 before, rest after.
Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias,
              bool causal);

// Inverted dropout: identity when !training or p == 0, otherwise each entry
// is zeroed with probability p and survivors are scaled by 1/(1-p).
Tensor dropout(const Tensor& x, Real p, bool training, Rng& rng);

// Concatenation along columns of tensors sharing the row count.
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Sum of a list of single-element tensors.
Tensor sum_scalars(std::span<const Tensor> scalars);

// Mean of the k largest entries (ties resolved towards the lower index).
// Gradient flows only to the selected entries.
Tensor topk_mean(const Tensor& x, std::size_t k);
// Indices of the k largest values, ties to the lower index, in selection
// order (largest first).
std::vector<std::size_t> topk_indices(std::span<const Real> values, std::size_t k);

// Mean binary cross-entropy of probabilities against a constant target.
// Probabilities are clamped to [clamp_eps, 1 - clamp_eps].
Tensor bce(const Tensor& p, Real target, Real clamp_eps = Real{1e-7});
// Mean squared error between same-shape tensors.
Tensor mse(const Tensor& a, const Tensor& b);

WSVAD_NAMESPACE_END

#endif  // WSVAD_OPS_H_
