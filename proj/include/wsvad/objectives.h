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

// Training objectives: the multiple-instance bag loss, the magnitude
// contrast hinge, score distillation and their weighted sum.

#ifndef WSVAD_OBJECTIVES_H_
#define WSVAD_OBJECTIVES_H_

#include <cstddef>

#include "json.hpp"
#include "wsvad/config.h"
#include "wsvad/tensor.h"

WSVAD_NAMESPACE_BEGIN

// max(1, ceil(T/16) + 1), capped at T.
std::size_t bag_topk(std::size_t steps);

// BCE between the mean of the top-k snippet scores and the video label.
// Throws ContractError for an empty series or k outside [1, T].
Tensor mil_bag_loss(const Tensor& scores, int label, std::size_t k);

// max(0, margin - (mu_a - mu_n)), where mu is the mean of the k largest row
// L2 norms of each feature matrix (k capped at the row count).
Tensor magnitude_contrast_loss(const Tensor& normal_feats, const Tensor& abnormal_feats,
                               std::size_t k, Real margin);

// Mean squared error between score series; 0 when `teacher` is undefined.
// Throws ContractError on a length mismatch.
Tensor distill_loss(const Tensor& student, const Tensor& teacher);

struct LossWeights {
  double kd = 0.0;
  double mc = 1.0;
  double dm = 1.0;
  double kl = 1e-3;
  double mc_margin = 1.0;
  std::size_t mc_topk = 3;

  // Throws ParameterError on a negative weight or a non-positive margin.
  void validate() const;
  nlohmann::json to_json() const;
};

struct LossParts {
  Tensor mil, kd, mc, dm, kl;
};

// mil + kd*L_kd + mc*L_mc + dm*L_dm + kl*L_kl. Undefined parts count as 0.
Tensor total_loss(const LossParts& parts, const LossWeights& w);

WSVAD_NAMESPACE_END

#endif  // WSVAD_OBJECTIVES_H_
