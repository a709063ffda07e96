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

#include "wsvad/attention.h"

#include <cmath>
#include <functional>
#include <vector>

#include "wsvad/errors.h"
#include "wsvad/ops.h"

WSVAD_NAMESPACE_BEGIN

namespace {

using BandFor = std::function<std::optional<std::size_t>(std::size_t head)>;

void check_heads(std::size_t width, std::size_t heads) {
  if (heads == 0 || width % heads != 0) {
    throw ConfigError("model width " + std::to_string(width) +
                      " is not divisible by " + std::to_string(heads) + " heads");
  }
}

Tensor multi_head_impl(const Tensor& x, const AttentionParams& p, const BandFor& band) {
  const std::size_t width = p.width();
  check_heads(width, p.heads);
  const std::size_t dk = width / p.heads;
  const Tensor q = p.q(x);
  const Tensor k = p.k(x);
  const Tensor v = p.v(x);
  std::vector<Tensor> heads;
  heads.reserve(p.heads);
  for (std::size_t h = 0; h < p.heads; ++h) {
    const std::size_t lo = h * dk, hi = lo + dk;
    heads.push_back(attention(slice_cols(q, lo, hi), slice_cols(k, lo, hi),
                              slice_cols(v, lo, hi), band(h)));
  }
  return p.out(p.heads == 1 ? heads.front() : concat_cols(heads));
}

}  // namespace

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v,
                 std::optional<std::size_t> band_radius) {
  if (q.ndim() != 2 || k.ndim() != 2 || v.ndim() != 2) {
    throw DimensionError("attention: q, k, v must be 2-D");
  }
  const std::size_t dk = q.cols();
  if (dk == 0) throw DimensionError("attention: key width must be positive");
  if (k.cols() != dk) throw DimensionError("attention: query and key widths differ");
  if (k.rows() != v.rows()) throw DimensionError("attention: keys and values differ in length");
  const Real scale = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(dk)));
  const Tensor logits = affine(matmul(q, transpose(k)), scale);
  return matmul(softmax_rows(logits, band_radius), v);
}

AttentionParams AttentionParams::create(std::size_t width, std::size_t heads, Rng& rng) {
  check_heads(width, heads);
  AttentionParams p;
  p.heads = heads;
  p.q = Linear::glorot(width, width, rng);
  p.k = Linear::glorot(width, width, rng);
  p.v = Linear::glorot(width, width, rng);
  p.out = Linear::glorot(width, width, rng);
  return p;
}

AttentionParams AttentionParams::zeros(std::size_t width, std::size_t heads) {
  check_heads(width, heads);
  return {heads, Linear::zeros(width, width), Linear::zeros(width, width),
          Linear::zeros(width, width), Linear::zeros(width, width)};
}

void AttentionParams::collect(const std::string& prefix, NamedParams& out) const {
  q.collect(prefix + ".q", out);
  k.collect(prefix + ".k", out);
  v.collect(prefix + ".v", out);
  this->out.collect(prefix + ".out", out);
}

TransformerBlockParams TransformerBlockParams::create(std::size_t width, std::size_t heads,
                                                      std::size_t ffn_width, Rng& rng) {
  TransformerBlockParams p;
  p.attn = AttentionParams::create(width, heads, rng);
  p.ffn_in = Linear::glorot(width, ffn_width, rng);
  p.ffn_out = Linear::glorot(ffn_width, width, rng);
  p.ln_attn = LayerNormParams::identity(width);
  p.ln_ffn = LayerNormParams::identity(width);
  return p;
}

void TransformerBlockParams::collect(const std::string& prefix, NamedParams& out) const {
  attn.collect(prefix + ".attn", out);
  ffn_in.collect(prefix + ".ffn_in", out);
  ffn_out.collect(prefix + ".ffn_out", out);
  ln_attn.collect(prefix + ".ln_attn", out);
  ln_ffn.collect(prefix + ".ln_ffn", out);
}

Tensor multi_head(const Tensor& x, const AttentionParams& p) {
  return multi_head_impl(x, p, [](std::size_t) { return std::nullopt; });
}

Tensor gl_mhsa_forward(const Tensor& x, const AttentionParams& p, std::size_t radius) {
  if (p.heads < 2 || p.heads % 2 != 0) {
    throw ConfigError("GL-MHSA needs an even number of heads, got " +
                      std::to_string(p.heads));
  }
  const std::size_t global_heads = p.heads / 2;
  return multi_head_impl(x, p, [=](std::size_t h) -> std::optional<std::size_t> {
    if (h < global_heads) return std::nullopt;
    return radius;
  });
}

Tensor transformer_block(const Tensor& x, const TransformerBlockParams& p) {
  const Tensor h = add(x, multi_head(p.ln_attn(x), p.attn));
  const Tensor ffn = p.ffn_out(relu(p.ffn_in(p.ln_ffn(h))));
  return add(h, ffn);
}

Tensor dpe_matrix(std::size_t steps, const Tensor& gamma, const Tensor& beta) {
  if (gamma.numel() != 1 || beta.numel() != 1) {
    throw DimensionError("dpe_matrix: gamma and beta must be single elements");
  }
  const double g = gamma.data()[0];
  const double b = beta.data()[0];
  std::vector<Real> out(steps * steps);
  for (std::size_t i = 0; i < steps; ++i) {
    for (std::size_t j = 0; j < steps; ++j) {
      const double d = static_cast<double>(i) - static_cast<double>(j);
      out[i * steps + j] = static_cast<Real>(std::exp(-std::abs(g * d * d + b)));
    }
  }
  return detail::make_result(
      {steps, steps}, std::move(out), {gamma, beta}, [steps, g, b](detail::Node& self) {
        // dG/du = -G sign(u) with u = gamma d^2 + beta; sign(0) taken as 0.
        double dgamma = 0.0, dbeta = 0.0;
        for (std::size_t i = 0; i < steps; ++i) {
          for (std::size_t j = 0; j < steps; ++j) {
            const double d = static_cast<double>(i) - static_cast<double>(j);
            const double u = g * d * d + b;
            const double sign = (u > 0) - (u < 0);
            const double common =
                -static_cast<double>(self.grad[i * steps + j]) * self.value[i * steps + j] * sign;
            dgamma += common * d * d;
            dbeta += common;
          }
        }
        detail::Node& gn = *self.inputs[0];
        detail::Node& bn = *self.inputs[1];
        if (gn.requires_grad) gn.grad[0] += static_cast<Real>(dgamma);
        if (bn.requires_grad) bn.grad[0] += static_cast<Real>(dbeta);
      });
}

TcaParams TcaParams::create(std::size_t input_width, std::size_t latent_width,
                            std::size_t radius, Rng& rng) {
  TcaParams p;
  p.f_q = Linear::glorot(input_width, latent_width, rng);
  p.f_k = Linear::glorot(input_width, latent_width, rng);
  p.f_v = Linear::glorot(input_width, latent_width, rng);
  p.f_h = Linear::glorot(latent_width, input_width, rng);
  p.gamma = constant_param({}, 1);
  p.beta = constant_param({}, 0);
  p.alpha_raw = constant_param({}, 0);
  p.ln = LayerNormParams::identity(input_width);
  p.radius = radius;
  return p;
}

Real TcaParams::alpha() const {
  const double raw = alpha_raw.item();
  return static_cast<Real>(1.0 / (1.0 + std::exp(-raw)));
}

void TcaParams::collect(const std::string& prefix, NamedParams& out) const {
  f_q.collect(prefix + ".f_q", out);
  f_k.collect(prefix + ".f_k", out);
  f_v.collect(prefix + ".f_v", out);
  f_h.collect(prefix + ".f_h", out);
  out.emplace_back(prefix + ".gamma", gamma);
  out.emplace_back(prefix + ".beta", beta);
  out.emplace_back(prefix + ".alpha_raw", alpha_raw);
  ln.collect(prefix + ".ln", out);
}

Tensor tca_forward(const Tensor& x, const TcaParams& p, TcaTrace* trace) {
  if (x.ndim() != 2 || x.rows() == 0) {
    throw DimensionError("tca_forward: expected [T x D] input with T >= 1");
  }
  const std::size_t steps = x.rows();
  const Real scale =
      static_cast<Real>(1.0 / std::sqrt(static_cast<double>(p.latent_width())));
  const Tensor values = p.f_v(x);
  const Tensor similarity = matmul(p.f_q(x), transpose(p.f_k(x)));

  const Tensor global_attn = softmax_rows(affine(similarity, scale));
  const Tensor global_ctx = matmul(global_attn, values);

  const Tensor modulated = mul(similarity, dpe_matrix(steps, p.gamma, p.beta));
  const Tensor local_attn = softmax_rows(affine(modulated, scale), p.radius);
  const Tensor local_ctx = matmul(local_attn, values);

  const Tensor alpha = sigmoid(p.alpha_raw);
  const Tensor mixed = add(scale_by(global_ctx, alpha),
                           scale_by(local_ctx, affine(alpha, -1, 1)));
  if (trace != nullptr) {
    *trace = {similarity, global_attn, local_attn, global_ctx, local_ctx, mixed};
  }
  return p.ln(add(x, p.f_h(l2_normalize_rows(mixed))));
}

WSVAD_NAMESPACE_END
