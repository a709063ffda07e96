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

// Dual memory unit: learnable normal/abnormal memory banks read through a
// sigmoid similarity, the dual memory loss, and normal-data uncertainty
// learning (a variational encoder with a KL penalty towards N(0, I)).

#ifndef WSVAD_MEMORY_H_
#define WSVAD_MEMORY_H_

#include <cstddef>
#include <string>
#include <vector>

#include "wsvad/attention.h"
#include "wsvad/config.h"
#include "wsvad/layers.h"
#include "wsvad/rng.h"
#include "wsvad/tensor.h"

WSVAD_NAMESPACE_BEGIN

enum class BankKind { kNormal, kAbnormal };

struct MemoryBank {
  Tensor slots;  // [K x D]
  BankKind kind = BankKind::kNormal;

  // Slots drawn from N(0, stddev^2).
  static MemoryBank create(std::size_t slots, std::size_t width, BankKind kind,
                           Rng& rng, double stddev = 0.02);

  std::size_t size() const { return slots.size(0); }
  std::size_t width() const { return slots.size(1); }
};

struct MemoryRead {
  Tensor scores;     // S = sigmoid(x slots^T / sqrt(D)), [T x K]
  Tensor augmented;  // S slots, [T x D]
};

MemoryRead memory_read(const Tensor& x, const MemoryBank& bank);

// Memory scores of a batch, one [T x K] matrix per video, grouped by the
// video label and by the bank that produced them.
struct DualMemoryScores {
  std::vector<Tensor> normal_vs_normal;
  std::vector<Tensor> normal_vs_abnormal;
  std::vector<Tensor> abnormal_vs_normal;
  std::vector<Tensor> abnormal_vs_abnormal;
};

// Top-k used for abnormal videos: max(1, ceil(T/16) + 1), capped at T.
std::size_t memory_topk(std::size_t steps);

// Sum of four BCE terms. Normal videos: every score against the normal bank
// targets 1, against the abnormal bank targets 0. Abnormal videos: scores are
// averaged over slots, the top-k steps are averaged, and both banks target 1.
// Each term is averaged over the videos of its group; empty groups add 0.
// Throws ContractError when top_k exceeds an abnormal video's length.
Tensor dual_memory_loss(const DualMemoryScores& scores, std::size_t top_k);
// Same, with top_k = memory_topk(T) per abnormal video.
Tensor dual_memory_loss(const DualMemoryScores& scores);

struct NulParams {
  Linear mean_encoder;
  Linear logvar_encoder;

  static NulParams create(std::size_t width, Rng& rng);
  void collect(const std::string& prefix, NamedParams& out) const;
};

struct NulOutput {
  Tensor z;       // mu + sigma * eps when training, mu otherwise
  Tensor mean;
  Tensor logvar;
  Tensor kl;      // KL(N(mu, sigma^2) || N(0, I)) summed over dims, averaged over T
};

NulOutput nul_forward(const Tensor& x, const NulParams& p, bool training, Rng& rng);

struct UrDmuParams {
  LayerNormParams norm;
  AttentionParams attention;  // GL-MHSA
  std::size_t radius = 8;
  NulParams nul;
  MemoryBank normal;
  MemoryBank abnormal;
  Linear proj_out;

  static UrDmuParams create(std::size_t width, std::size_t heads, std::size_t slots,
                            std::size_t radius, Rng& rng);
  void collect(const std::string& prefix, NamedParams& out) const;
};

struct UrDmuOutput {
  Tensor features;  // proj_out(z + S_n M_n + S_a M_a), [T x D]
  MemoryRead normal_read;
  MemoryRead abnormal_read;
  NulOutput nul;
};

// Pre-norm residual GL-MHSA, x + GL-MHSA(LN(x)) (skipped when use_attention
// is false), then NUL, reads against both
// banks, then additive combination and output projection.
UrDmuOutput urdmu_forward(const Tensor& x, const UrDmuParams& p, bool training, Rng& rng,
                          bool use_attention = true);

WSVAD_NAMESPACE_END

#endif  // WSVAD_MEMORY_H_
