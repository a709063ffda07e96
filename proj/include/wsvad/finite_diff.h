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

// Central finite-difference checking of reverse-mode gradients.

#ifndef WSVAD_FINITE_DIFF_H_
#define WSVAD_FINITE_DIFF_H_

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "wsvad/config.h"
#include "wsvad/layers.h"
#include "wsvad/rng.h"
#include "wsvad/tensor.h"

WSVAD_NAMESPACE_BEGIN

struct FiniteDiffOptions {
  double step = 1e-5;
  std::size_t max_probes = 64;  // entries probed per input tensor
  // Lower bound of the error denominator. Gradients that vanish exactly
  // (e.g. attention key biases, which softmax ignores) then report round-off
  // over 1e-5 rather than round-off over round-off.
  double floor = 1e-5;
};

struct TensorGradError {
  std::string name;
  // ||analytic - numeric|| / max(||analytic||, ||numeric||, floor) over the
  // probed entries.
  double error = 0.0;
  std::size_t probes = 0;
};

// Differentiates sum(f() * R) for a fixed R ~ N(0, 1) drawn from `rng`, once
// by backward() and once by central differences on each input. `f` must be
// deterministic, so any Rng it uses has to be created inside it. Inputs must
// be leaves with requires_grad set; their gradients are overwritten.
std::vector<TensorGradError> check_gradients(const std::function<Tensor()>& f,
                                             const NamedParams& inputs, Rng& rng,
                                             const FiniteDiffOptions& opts = {});

WSVAD_NAMESPACE_END

#endif  // WSVAD_FINITE_DIFF_H_
