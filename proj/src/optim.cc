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

#include "wsvad/optim.h"

#include <cmath>

#include "wsvad/errors.h"

WSVAD_NAMESPACE_BEGIN

void adam_step(std::span<Tensor> params, AdamState& state) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      throw ContractError("adam_step: parameter " + std::to_string(i) +
                          " has no gradient");
    }
  }
  if (state.m.size() != params.size()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != p.numel()) {
      m.assign(p.numel(), Real{0});
      v.assign(p.numel(), Real{0});
    }
    auto w = p.mutable_data();
    const auto g = p.grad();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g[j];
      m[j] = static_cast<Real>(state.beta1 * m[j] + (1.0 - state.beta1) * gj);
      v[j] = static_cast<Real>(state.beta2 * v[j] + (1.0 - state.beta2) * gj * gj);
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      w[j] = static_cast<Real>(w[j] - state.lr * mhat / (std::sqrt(vhat) + state.eps));
    }
    p.clear_grad();
  }
}

void Adam::add_group(std::string name, std::vector<Tensor> params, double lr) {
  Group g{std::move(name), std::move(params), {}};
  g.state.lr = lr;
  groups_.push_back(std::move(g));
}

void Adam::zero_grad() {
  for (auto& g : groups_)
    for (auto& p : g.params) p.zero_grad();
}

void Adam::step() {
  for (auto& g : groups_) adam_step(g.params, g.state);
}

WSVAD_NAMESPACE_END
