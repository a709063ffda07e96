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

#include "wsvad/objectives.h"

#include <algorithm>
#include <string>
#include <vector>

#include "wsvad/errors.h"
#include "wsvad/ops.h"

WSVAD_NAMESPACE_BEGIN

std::size_t bag_topk(std::size_t steps) {
  const std::size_t k = (steps + 15) / 16 + 1;
  return std::min(k, std::max<std::size_t>(steps, 1));
}

Tensor mil_bag_loss(const Tensor& scores, int label, std::size_t k) {
  if (!scores.defined() || scores.numel() == 0) {
    throw ContractError("mil_bag_loss: empty score series");
  }
  if (label != 0 && label != 1) throw ContractError("mil_bag_loss: label must be 0 or 1");
  if (k == 0 || k > scores.numel()) {
    throw ContractError("mil_bag_loss: k = " + std::to_string(k) + " with T = " +
                        std::to_string(scores.numel()));
  }
  return bce(topk_mean(scores, k), static_cast<Real>(label));
}

Tensor magnitude_contrast_loss(const Tensor& normal_feats, const Tensor& abnormal_feats,
                               std::size_t k, Real margin) {
  if (normal_feats.rows() == 0 || abnormal_feats.rows() == 0) {
    throw ContractError("magnitude_contrast_loss: empty feature batch");
  }
  if (k == 0) throw ContractError("magnitude_contrast_loss: k must be positive");
  const Tensor mu_n = topk_mean(row_norms(normal_feats), std::min(k, normal_feats.rows()));
  const Tensor mu_a = topk_mean(row_norms(abnormal_feats), std::min(k, abnormal_feats.rows()));
  // margin - (mu_a - mu_n), hinged at 0.
  return relu(affine(sub(mu_a, mu_n), -1, margin));
}

Tensor distill_loss(const Tensor& student, const Tensor& teacher) {
  if (!teacher.defined()) return Tensor::scalar(0);
  if (student.numel() != teacher.numel()) {
    throw ContractError("distill_loss: student has " + std::to_string(student.numel()) +
                        " scores, teacher " + std::to_string(teacher.numel()));
  }
  return mse(student, teacher.detach());
}

void LossWeights::validate() const {
  if (kd < 0 || mc < 0 || dm < 0 || kl < 0) {
    throw ParameterError("loss weights must be non-negative");
  }
  if (!(mc_margin > 0)) throw ParameterError("mc_margin must be positive");
  if (mc_topk == 0) throw ParameterError("mc_topk must be positive");
}

nlohmann::json LossWeights::to_json() const {
  return {{"kd", kd}, {"mc", mc}, {"dm", dm}, {"kl", kl},
          {"mc_margin", mc_margin}, {"mc_topk", mc_topk}};
}

Tensor total_loss(const LossParts& parts, const LossWeights& w) {
  if (!parts.mil.defined()) throw ContractError("total_loss: the MIL term is required");
  std::vector<Tensor> terms = {parts.mil};
  auto add_term = [&](const Tensor& t, double weight) {
    if (t.defined()) terms.push_back(affine(t, static_cast<Real>(weight)));
  };
  add_term(parts.kd, w.kd);
  add_term(parts.mc, w.mc);
  add_term(parts.dm, w.dm);
  add_term(parts.kl, w.kl);
  return sum_scalars(terms);
}

WSVAD_NAMESPACE_END
