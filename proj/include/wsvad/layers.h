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

#ifndef WSVAD_LAYERS_H_
#define WSVAD_LAYERS_H_

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "wsvad/config.h"
#include "wsvad/rng.h"
#include "wsvad/tensor.h"

WSVAD_NAMESPACE_BEGIN

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

// Trainable leaf with entries drawn from U(-bound, bound).
Tensor uniform_param(Shape shape, double bound, Rng& rng);
// Trainable leaf with entries drawn from N(0, stddev^2).
Tensor normal_param(Shape shape, double stddev, Rng& rng);
// Trainable leaf filled with `value`.
Tensor constant_param(Shape shape, Real value);

// Affine map y = x W + b with W stored [in x out].
struct Linear {
  Tensor weight;
  Tensor bias;

  // Glorot-uniform weights, zero bias.
  static Linear glorot(std::size_t in, std::size_t out, Rng& rng);
  static Linear zeros(std::size_t in, std::size_t out);

  std::size_t in_features() const { return weight.size(0); }
  std::size_t out_features() const { return weight.size(1); }

  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

struct LayerNormParams {
  Tensor gain;
  Tensor bias;

  static LayerNormParams identity(std::size_t width);

  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

// Temporal convolution with kernel [k x in x out] and bias [out].
struct Conv1dParams {
  Tensor kernel;
  Tensor bias;
  bool causal = false;

  static Conv1dParams glorot(std::size_t k, std::size_t in, std::size_t out,
                             bool causal, Rng& rng);

  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

WSVAD_NAMESPACE_END

#endif  // WSVAD_LAYERS_H_
