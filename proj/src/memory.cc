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

#include "wsvad/memory.h"

#include <algorithm>
#include <cmath>
#include <functional>

#include "wsvad/errors.h"
#include "wsvad/ops.h"

WSVAD_NAMESPACE_BEGIN

namespace {

// Initial NUL log-variance bias, i.e. sigma = exp(-2).
constexpr Real kInitialLogvar = -4;

Tensor group_mean(std::vector<Tensor> terms) {
  if (terms.empty()) return Tensor::scalar(0);
  return affine(sum_scalars(terms), static_cast<Real>(1.0 / static_cast<double>(terms.size())));
}

Tensor dual_memory_loss_impl(const DualMemoryScores& s,
                             const std::function<std::size_t(std::size_t)>& topk_for) {
  if (s.normal_vs_normal.size() != s.normal_vs_abnormal.size() ||
      s.abnormal_vs_normal.size() != s.abnormal_vs_abnormal.size()) {
    throw ContractError("dual_memory_loss: bank score groups differ in size");
  }
  std::vector<Tensor> nn, na, an, aa;
  for (std::size_t i = 0; i < s.normal_vs_normal.size(); ++i) {
    nn.push_back(bce(s.normal_vs_normal[i], 1));
    na.push_back(bce(s.normal_vs_abnormal[i], 0));
  }
  for (std::size_t i = 0; i < s.abnormal_vs_normal.size(); ++i) {
    const std::size_t steps = s.abnormal_vs_normal[i].rows();
    const std::size_t k = topk_for(steps);
    if (k == 0 || k > steps) {
      throw ContractError("dual_memory_loss: top_k = " + std::to_string(k) +
                          " invalid for a video of " + std::to_string(steps) + " steps");
    }
    an.push_back(bce(topk_mean(row_mean(s.abnormal_vs_normal[i]), k), 1));
    aa.push_back(bce(topk_mean(row_mean(s.abnormal_vs_abnormal[i]), k), 1));
  }
  const std::vector<Tensor> terms = {group_mean(std::move(nn)), group_mean(std::move(na)),
                                     group_mean(std::move(an)), group_mean(std::move(aa))};
  return sum_scalars(terms);
}

}  // namespace

MemoryBank MemoryBank::create(std::size_t slots, std::size_t width, BankKind kind,
                              Rng& rng, double stddev) {
  if (slots == 0) throw ConfigError("memory bank needs at least one slot");
  return {normal_param({slots, width}, stddev, rng), kind};
}

MemoryRead memory_read(const Tensor& x, const MemoryBank& bank) {
  if (x.ndim() != 2 || x.cols() != bank.width()) {
    throw DimensionError("memory_read: input " + shape_string(x.shape()) +
                         " does not match slot width " + std::to_string(bank.width()));
  }
  const Real scale = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(bank.width())));
  const Tensor scores = sigmoid(affine(matmul(x, transpose(bank.slots)), scale));
  return {scores, matmul(scores, bank.slots)};
}

std::size_t memory_topk(std::size_t steps) {
  const std::size_t k = std::max<std::size_t>(1, (steps + 15) / 16 + 1);
  return std::min(k, std::max<std::size_t>(steps, 1));
}

Tensor dual_memory_loss(const DualMemoryScores& scores, std::size_t top_k) {
  return dual_memory_loss_impl(scores, [top_k](std::size_t) { return top_k; });
}

Tensor dual_memory_loss(const DualMemoryScores& scores) {
  return dual_memory_loss_impl(scores, memory_topk);
}

NulParams NulParams::create(std::size_t width, Rng& rng) {
  NulParams p;
  p.mean_encoder = Linear::glorot(width, width, rng);
  p.logvar_encoder = Linear::zeros(width, width);
  std::fill(p.logvar_encoder.bias.mutable_data().begin(),
            p.logvar_encoder.bias.mutable_data().end(), kInitialLogvar);
  return p;
}

void NulParams::collect(const std::string& prefix, NamedParams& out) const {
  mean_encoder.collect(prefix + ".mean_encoder", out);
  logvar_encoder.collect(prefix + ".logvar_encoder", out);
}

NulOutput nul_forward(const Tensor& x, const NulParams& p, bool training, Rng& rng) {
  NulOutput out;
  out.mean = p.mean_encoder(x);
  out.logvar = p.logvar_encoder(x);
  const std::size_t steps = x.rows();
  const std::size_t width = x.cols();
  if (training) {
    std::vector<Real> eps(steps * width);
    for (Real& e : eps) e = static_cast<Real>(rng.normal());
    const Tensor noise = Tensor::from_values({steps, width}, std::move(eps));
    out.z = add(out.mean, mul(exp(affine(out.logvar, Real{0.5})), noise));
  } else {
    out.z = out.mean;
  }
  // 1/2 sum(mu^2 + exp(lv) - 1 - lv), averaged over steps.
  const Tensor per_entry =
      sub(add(mul(out.mean, out.mean), exp(out.logvar)), affine(out.logvar, 1, 1));
  out.kl = affine(sum(per_entry), static_cast<Real>(0.5 / static_cast<double>(steps)));
  return out;
}

UrDmuParams UrDmuParams::create(std::size_t width, std::size_t heads, std::size_t slots,
                                std::size_t radius, Rng& rng) {
  UrDmuParams p;
  p.norm = LayerNormParams::identity(width);
  p.attention = AttentionParams::create(width, heads, rng);
  p.radius = radius;
  p.nul = NulParams::create(width, rng);
  p.normal = MemoryBank::create(slots, width, BankKind::kNormal, rng);
  p.abnormal = MemoryBank::create(slots, width, BankKind::kAbnormal, rng);
  p.proj_out = Linear::glorot(width, width, rng);
  return p;
}

void UrDmuParams::collect(const std::string& prefix, NamedParams& out) const {
  norm.collect(prefix + ".ln", out);
  attention.collect(prefix + ".gl_mhsa", out);
  nul.collect(prefix + ".nul", out);
  out.emplace_back(prefix + ".memory_normal", normal.slots);
  out.emplace_back(prefix + ".memory_abnormal", abnormal.slots);
  proj_out.collect(prefix + ".proj_out", out);
}

UrDmuOutput urdmu_forward(const Tensor& x, const UrDmuParams& p, bool training, Rng& rng,
                          bool use_attention) {
  Tensor attended = x;
  if (use_attention) {
    attended = add(x, gl_mhsa_forward(p.norm(x), p.attention, p.radius));
  }
  UrDmuOutput out;
  out.nul = nul_forward(attended, p.nul, training, rng);
  out.normal_read = memory_read(out.nul.z, p.normal);
  out.abnormal_read = memory_read(out.nul.z, p.abnormal);
  const Tensor combined =
      add(add(out.nul.z, out.normal_read.augmented), out.abnormal_read.augmented);
  out.features = p.proj_out(combined);
  return out;
}

WSVAD_NAMESPACE_END
