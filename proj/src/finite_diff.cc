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

#include "wsvad/finite_diff.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wsvad/errors.h"
#include "wsvad/ops.h"

WSVAD_NAMESPACE_BEGIN

namespace {

std::vector<std::size_t> probe_entries(std::size_t numel, std::size_t max_probes, Rng& rng) {
  std::vector<std::size_t> idx(numel);
  std::iota(idx.begin(), idx.end(), 0);
  if (numel <= max_probes) return idx;
  for (std::size_t i = 0; i < max_probes; ++i) {
    std::swap(idx[i], idx[i + rng.below(numel - i)]);
  }
  idx.resize(max_probes);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

std::vector<TensorGradError> check_gradients(const std::function<Tensor()>& f,
                                             const NamedParams& inputs, Rng& rng,
                                             const FiniteDiffOptions& opts) {
  if (!(opts.step > 0) || opts.max_probes == 0) {
    throw ParameterError("check_gradients: step and max_probes must be positive");
  }
  for (const auto& [name, t] : inputs) {
    if (!t.defined() || !t.requires_grad()) {
      throw ContractError("check_gradients: input " + name + " does not require grad");
    }
    Tensor(t).clear_grad();
  }

  const Tensor out = f();
  std::vector<Real> weights(out.numel());
  for (Real& w : weights) w = static_cast<Real>(rng.normal());
  backward(sum(mul(out, Tensor::from_values(out.shape(), weights))));

  auto objective = [&] {
    NoGradGuard no_grad;
    const Tensor out = f();
    const auto y = out.data();
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += static_cast<double>(y[i]) * weights[i];
    return s;
  };

  std::vector<TensorGradError> report;
  for (const auto& [name, input] : inputs) {
    Tensor t = input;
    const std::vector<Real> analytic =
        t.has_grad() ? std::vector<Real>(t.grad().begin(), t.grad().end())
                     : std::vector<Real>(t.numel(), Real{0});
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    const auto entries = probe_entries(t.numel(), opts.max_probes, rng);
    for (std::size_t j : entries) {
      Real& v = t.mutable_data()[j];
      const Real saved = v;
      v = static_cast<Real>(saved + opts.step);
      const double plus = objective();
      v = static_cast<Real>(saved - opts.step);
      const double minus = objective();
      v = saved;
      const double numeric = (plus - minus) / (2.0 * opts.step);
      const double a = analytic[j];
      diff2 += (a - numeric) * (a - numeric);
      a2 += a * a;
      n2 += numeric * numeric;
    }
    const double denom = std::max({std::sqrt(a2), std::sqrt(n2), opts.floor});
    report.push_back({name, std::sqrt(diff2) / denom, entries.size()});
  }
  return report;
}

WSVAD_NAMESPACE_END
