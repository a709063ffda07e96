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

#include "wsvad/layers.h"

#include <cmath>

#include "wsvad/ops.h"

WSVAD_NAMESPACE_BEGIN

Tensor uniform_param(Shape shape, double bound, Rng& rng) {
  std::vector<Real> values(shape_numel(shape));
  for (Real& v : values) v = static_cast<Real>((2.0 * rng.uniform() - 1.0) * bound);
  return Tensor::from_values(std::move(shape), std::move(values), true);
}

Tensor normal_param(Shape shape, double stddev, Rng& rng) {
  std::vector<Real> values(shape_numel(shape));
  for (Real& v : values) v = static_cast<Real>(rng.normal() * stddev);
  return Tensor::from_values(std::move(shape), std::move(values), true);
}

Tensor constant_param(Shape shape, Real value) {
  return Tensor::full(std::move(shape), value, true);
}

Linear Linear::glorot(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  return {uniform_param({in, out}, bound, rng), constant_param({out}, 0)};
}

Linear Linear::zeros(std::size_t in, std::size_t out) {
  return {constant_param({in, out}, 0), constant_param({out}, 0)};
}

Tensor Linear::operator()(const Tensor& x) const {
  return add_bias(matmul(x, weight), bias);
}

void Linear::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

LayerNormParams LayerNormParams::identity(std::size_t width) {
  return {constant_param({width}, 1), constant_param({width}, 0)};
}

Tensor LayerNormParams::operator()(const Tensor& x) const {
  return layer_norm(x, gain, bias);
}

void LayerNormParams::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".gain", gain);
  out.emplace_back(prefix + ".bias", bias);
}

Conv1dParams Conv1dParams::glorot(std::size_t k, std::size_t in, std::size_t out,
                                  bool causal, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(k * in + out));
  return {uniform_param({k, in, out}, bound, rng), constant_param({out}, 0), causal};
}

Tensor Conv1dParams::operator()(const Tensor& x) const {
  return conv1d(x, kernel, bias, causal);
}

void Conv1dParams::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".kernel", kernel);
  out.emplace_back(prefix + ".bias", bias);
}

WSVAD_NAMESPACE_END
