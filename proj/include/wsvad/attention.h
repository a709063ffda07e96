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

// Temporal attention blocks: scaled dot-product attention, multi-head and
// global/local multi-head self-attention, the pre-norm transformer block and
// temporal context aggregation (TCA) with dynamic position encoding.

#ifndef WSVAD_ATTENTION_H_
#define WSVAD_ATTENTION_H_

#include <cstddef>
#include <optional>
#include <string>

#include "wsvad/config.h"
#include "wsvad/layers.h"
#include "wsvad/rng.h"
#include "wsvad/tensor.h"

WSVAD_NAMESPACE_BEGIN

// softmax(q k^T / sqrt(d_k)) v for q, k, v of shape [T x d_k]. With
// `band_radius` set, step i only attends to steps j with |i - j| <= radius.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v,
                 std::optional<std::size_t> band_radius = std::nullopt);

// Multi-head self-attention weights. Head h uses columns
// [h * width/heads, (h+1) * width/heads) of the q/k/v projections.
struct AttentionParams {
  std::size_t heads = 1;
  Linear q, k, v, out;

  static AttentionParams create(std::size_t width, std::size_t heads, Rng& rng);
  static AttentionParams zeros(std::size_t width, std::size_t heads);

  std::size_t width() const { return q.in_features(); }
  void collect(const std::string& prefix, NamedParams& out) const;
};

struct TransformerBlockParams {
  AttentionParams attn;
  Linear ffn_in;   // width -> ffn width
  Linear ffn_out;  // ffn width -> width
  LayerNormParams ln_attn;
  LayerNormParams ln_ffn;

  static TransformerBlockParams create(std::size_t width, std::size_t heads,
                                       std::size_t ffn_width, Rng& rng);

  std::size_t width() const { return attn.width(); }
  void collect(const std::string& prefix, NamedParams& out) const;
};

// Concat(head_1..head_h) W_O + b_O over x [T x width].
// Throws ConfigError when width is not divisible by the head count.
Tensor multi_head(const Tensor& x, const AttentionParams& p);

// Like multi_head, but the second half of the heads only attend within
// |i - j| <= radius. Needs an even head count of at least 2.
Tensor gl_mhsa_forward(const Tensor& x, const AttentionParams& p, std::size_t radius);

// Pre-norm wiring: h = x + MHSA(LN(x)); out = h + FFN(LN(h)), where
// FFN(x) = ReLU(x W1 + b1) W2 + b2.
Tensor transformer_block(const Tensor& x, const TransformerBlockParams& p);

// Dynamic position encoding G_ij = exp(-|gamma (i-j)^2 + beta|), [T x T].
// gamma and beta are single-element tensors and receive gradients.
Tensor dpe_matrix(std::size_t steps, const Tensor& gamma, const Tensor& beta);

struct TcaParams {
  Linear f_q, f_k, f_v;  // input width -> latent width
  Linear f_h;            // latent width -> input width
  Tensor gamma;          // DPE scale, init 1
  Tensor beta;           // DPE offset, init 0
  Tensor alpha_raw;      // mixing weight alpha = sigmoid(alpha_raw), init 0
  LayerNormParams ln;
  std::size_t radius = 8;

  static TcaParams create(std::size_t input_width, std::size_t latent_width,
                          std::size_t radius, Rng& rng);

  std::size_t latent_width() const { return f_q.out_features(); }
  Real alpha() const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

// Intermediate tensors of one TCA pass, for inspection in tests.
struct TcaTrace {
  Tensor similarity;     // M
  Tensor global_attn;    // A^g
  Tensor local_attn;     // A^l
  Tensor global_ctx;     // X^g
  Tensor local_ctx;      // X^l
  Tensor mixed;          // X^o
};

// Temporal context aggregation over x [T x input width]:
//   M = f_q(x) f_k(x)^T, A^g = softmax(M / sqrt(D_h)), X^g = A^g f_v(x)
//   A^l = softmax((M * G) / sqrt(D_h)) restricted to |i-j| <= radius
//   X^o = alpha X^g + (1 - alpha) X^l
//   out = LN(x + f_h(L2Normalize(X^o)))
Tensor tca_forward(const Tensor& x, const TcaParams& p, TcaTrace* trace = nullptr);

WSVAD_NAMESPACE_END

#endif  // WSVAD_ATTENTION_H_
