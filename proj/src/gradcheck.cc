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

#include "wsvad/gradcheck.h"

#include <chrono>
#include <functional>
#include <map>
#include <type_traits>

#include "wsvad/attention.h"
#include "wsvad/finite_diff.h"
#include "wsvad/memory.h"
#include "wsvad/model.h"
#include "wsvad/objectives.h"
#include "wsvad/ops.h"

static_assert(std::is_same_v<wsvad::Real, double>, "the gradient suite needs double precision");

namespace wsvad::gradcheck {

namespace {

struct Probe {
  NamedParams inputs;
  std::function<Tensor()> f;
};

struct Case {
  const char* group;
  const char* name;
  std::function<Probe(std::uint64_t)> build;
};

Tensor randn(Shape shape, Rng& rng, double scale = 1.0) {
  return normal_param(std::move(shape), scale, rng);
}

// Entries with magnitude in [0.2, 1.2] and random sign, clear of kinks at 0.
Tensor signed_away_from_zero(Shape shape, Rng& rng) {
  std::vector<Real> v(shape_numel(shape));
  for (Real& x : v) x = (rng.uniform() < 0.5 ? -1 : 1) * (0.2 + rng.uniform());
  return Tensor::from_values(std::move(shape), std::move(v), true);
}

Tensor probabilities(Shape shape, Rng& rng) {
  std::vector<Real> v(shape_numel(shape));
  for (Real& x : v) x = 0.05 + 0.9 * rng.uniform();
  return Tensor::from_values(std::move(shape), std::move(v), true);
}

Tensor positive(Real lo, Real hi, Rng& rng) {
  return Tensor::scalar(lo + (hi - lo) * rng.uniform(), true);
}

// Fixed random projection of several outputs onto one scalar.
Tensor project(const std::vector<Tensor>& outputs, std::uint64_t seed) {
  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<Tensor> terms;
  for (const Tensor& y : outputs) {
    std::vector<Real> w(y.numel());
    for (Real& x : w) x = rng.normal();
    terms.push_back(sum(mul(y, Tensor::from_values(y.shape(), std::move(w)))));
  }
  return sum_scalars(terms);
}

// A model small enough to probe every weight.
ModelConfig tiny_config(std::uint64_t seed) {
  ModelConfig cfg;
  cfg.rgb_dim = 6;
  cfg.clip_dim = 5;
  cfg.flow_dim = 6;
  cfg.audio_dim = 4;
  cfg.branch_dim = 4;
  cfg.tca_dim = 4;
  cfg.hidden_dim = 8;
  cfg.heads = 2;
  cfg.ffn_dim = 8;
  cfg.memory_slots = 3;
  cfg.local_radius = 1;
  cfg.i3d_kernel = 3;
  cfg.causal_kernel = 3;
  cfg.topk_ratio = 0.5;
  cfg.seed = seed;
  return cfg;
}

// Moves the DPE offset off the |.| kink at zero distance.
void offset_dpe(const TcaParams& p) { Tensor(p.beta).mutable_data()[0] = 0.3; }

template <typename P>
NamedParams params_of(const P& p, const std::string& prefix) {
  NamedParams out;
  p.collect(prefix, out);
  return out;
}

void append(NamedParams& to, const NamedParams& from) { to.insert(to.end(), from.begin(), from.end()); }

std::vector<Case> op_cases() {
  std::vector<Case> c;
  c.push_back({"op", "matmul", [](std::uint64_t s) {
                 Rng r(s);
                 Tensor a = randn({3, 4}, r), b = randn({4, 2}, r);
                 return Probe{{{"a", a}, {"b", b}}, [=] { return matmul(a, b); }};
               }});
  c.push_back({"op", "transpose", [](std::uint64_t s) {
                 Rng r(s);
                 Tensor a = randn({3, 4}, r);
                 return Probe{{{"a", a}}, [=] { return transpose(a); }};
               }});
  c.push_back({"op", "add_sub_mul", [](std::uint64_t s) {
                 Rng r(s);
                 Tensor a = randn({3, 4}, r), b = randn({3, 4}, r);
                 return Probe{{{"a", a}, {"b", b}}, [=] { return mul(add(a, b), sub(a, b)); }};
               }});
  c.push_back({"op", "add_bias", [](std::uint64_t s) {
                 Rng r(s);
                 Tensor x = randn({3, 4}, r), b = randn({4}, r);
                 return Probe{{{"x", x}, {"bias", b}}, [=] { return add_bias(x, b); }};
               }});
  c.push_back({"op", "affine", [](std::uint64_t s) {
                 Rng r(s);
                 Tensor x = randn({3, 4}, r);
                 return Probe{{{"x", x}}, [=] { return affine(x, -1.7, 0.4); }};
               }});
  c.push_back({"op", "scale_by", [](std::uint64_t s) {
                 Rng r(s);
                 Tensor x = randn({3, 4}, r), k = positive(-2, 2, r);
                 return Probe{{{"x", x}, {"s", k}}, [=] { return scale_by(x, k); }};
               }});
  c.push_back({"op", "mul_rows", [](std::uint64_t s) {
                 Rng r(s);
                 Tensor x = randn({3, 4}, r), col = randn({3, 1}, r);
                 return Probe{{{"x", x}, {"column", col}}, [=] { return mul_rows(x, col); }};
               }});
  c.push_back({"op", "sigmoid", [](std::uint64_t s) {
                 Rng r(s);
                 Tensor x = randn({3, 4}, r, 2.0);
                 return Probe{{{"x", x}}, [=] { return sigmoid(x); }};
               }});
  c.push_back({"op", "relu", [](std::uint64_t s) {
                 Rng r(s);
                 Tensor x = signed_away_from_zero({3, 4}, r);
                 return Probe{{{"x", x}}, [=] { return relu(x); }};
               }});
  c.push_back({"op", "gelu", [](std::uint64_t s) {
                 Rng r(s);
                 Tensor x = randn({3, 4}, r, 2.0);
                 return Probe{{{"x", x}}, [=] { return gelu(x); }};
               }});
  c.push_back({"op", "exp", [](std::uint64_t s) {
                 Rng r(s);
                 Tensor x = randn({3, 4}, r);
                 return Probe{{{"x", x}}, [=] { return exp(x); }};
               }});
  c.push_back({"op", "softmax_rows", [](std::uint64_t s) {
                 Rng r(s);
                 Tensor x = randn({4, 5}, r, 2.0);
                 return Probe{{{"x", x}}, [=] { return softmax_rows(x); }};
               }});
  c.push_back({"op", "softmax_rows_banded", [](std::uint64_t s) {
                 Rng r(s);
                 Tensor x = randn({5, 5}, r, 2.0);
                 return Probe{{{"x", x}}, [=] { return softmax_rows(x, 1); }};
               }});
  c.push_back({"op", "layer_norm", [](std::uint64_t s) {
                 Rng r(s);
                 Tensor x = randn({3, 5}, r, 2.0), g = randn({5}, r), b = randn({5}, r);
                 return Probe{{{"x", x}, {"gain", g}, {"bias", b}},
                              [=] { return layer_norm(x, g, b); }};
               }});
  c.push_back({"op", "l2_normalize_rows", [](std::uint64_t s) {
                 Rng r(s);
                 Tensor x = randn({3, 4}, r);
                 return Probe{{{"x", x}}, [=] { return l2_normalize_rows(x); }};
               }});
  c.push_back({"op", "row_norms", [](std::uint64_t s) {
                 Rng r(s);
                 Tensor x = randn({3, 4}, r);
                 return Probe{{{"x", x}}, [=] { return row_norms(x); }};
               }});
  c.push_back({"op", "row_mean", [](std::uint64_t s) {
                 Rng r(s);
                 Tensor x = randn({3, 4}, r);
                 return Probe{{{"x", x}}, [=] { return row_mean(x); }};
               }});
  for (bool causal : {false, true}) {
    c.push_back({"op", causal ? "conv1d_causal" : "conv1d", [causal](std::uint64_t s) {
                   Rng r(s);
                   Tensor x = randn({6, 3}, r), k = randn({3, 3, 2}, r), b = randn({2}, r);
                   return Probe{{{"x", x}, {"kernel", k}, {"bias", b}},
                                [=] { return conv1d(x, k, b, causal); }};
                 }});
  }
  c.push_back({"op", "dropout", [](std::uint64_t s) {
                 Rng r(s);
                 Tensor x = randn({4, 5}, r);
                 return Probe{{{"x", x}}, [=] {
                                Rng mask(s);
                                return dropout(x, 0.3, true, mask);
                              }};
               }});
  c.push_back({"op", "concat_slice_gather", [](std::uint64_t s) {
                 Rng r(s);
                 Tensor a = randn({4, 2}, r), b = randn({4, 3}, r);
                 return Probe{{{"a", a}, {"b", b}}, [=] {
                                const Tensor parts[] = {a, b};
                                const std::size_t rows[] = {2, 0, 2};
                                return gather_rows(slice_cols(concat_cols(parts), 1, 4), rows);
                              }};
               }});
  c.push_back({"op", "sum_mean", [](std::uint64_t s) {
                 Rng r(s);
                 Tensor x = randn({3, 4}, r), y = randn({2, 2}, r), z = positive(-1, 1, r);
                 return Probe{{{"x", x}, {"y", y}, {"z", z}}, [=] {
                                const Tensor parts[] = {sum(x), mean(y), z};
                                return sum_scalars(parts);
                              }};
               }});
  c.push_back({"op", "topk_mean", [](std::uint64_t s) {
                 Rng r(s);
                 Tensor x = randn({7, 1}, r);
                 return Probe{{{"x", x}}, [=] { return topk_mean(x, 3); }};
               }});
  c.push_back({"op", "bce", [](std::uint64_t s) {
                 Rng r(s);
                 Tensor p = probabilities({5, 1}, r);
                 return Probe{{{"p", p}}, [=] { return bce(p, 0.3); }};
               }});
  c.push_back({"op", "mse", [](std::uint64_t s) {
                 Rng r(s);
                 Tensor a = randn({4, 1}, r), b = randn({4, 1}, r);
                 return Probe{{{"a", a}, {"b", b}}, [=] { return mse(a, b); }};
               }});
  c.push_back({"op", "dpe_matrix", [](std::uint64_t s) {
                 Rng r(s);
                 Tensor g = positive(0.2, 1.5, r), b = positive(0.1, 1.0, r);
                 return Probe{{{"gamma", g}, {"beta", b}}, [=] { return dpe_matrix(5, g, b); }};
               }});
  return c;
}

std::vector<Case> block_cases() {
  std::vector<Case> c;
  c.push_back({"block", "attention", [](std::uint64_t s) {
                 Rng r(s);
                 Tensor q = randn({5, 4}, r), k = randn({5, 4}, r), v = randn({5, 3}, r);
                 return Probe{{{"q", q}, {"k", k}, {"v", v}}, [=] {
                                return project({attention(q, k, v), attention(q, k, v, 1)}, s);
                              }};
               }});
  c.push_back({"block", "multi_head", [](std::uint64_t s) {
                 Rng r(s);
                 const auto p = AttentionParams::create(8, 2, r);
                 Tensor x = randn({5, 8}, r);
                 NamedParams in = {{"x", x}};
                 append(in, params_of(p, "mhsa"));
                 return Probe{in, [=] { return multi_head(x, p); }};
               }});
  c.push_back({"block", "gl_mhsa", [](std::uint64_t s) {
                 Rng r(s);
                 const auto p = AttentionParams::create(8, 2, r);
                 Tensor x = randn({6, 8}, r);
                 NamedParams in = {{"x", x}};
                 append(in, params_of(p, "gl_mhsa"));
                 return Probe{in, [=] { return gl_mhsa_forward(x, p, 1); }};
               }});
  c.push_back({"block", "transformer_block", [](std::uint64_t s) {
                 Rng r(s);
                 const auto p = TransformerBlockParams::create(8, 2, 8, r);
                 Tensor x = randn({5, 8}, r);
                 NamedParams in = {{"x", x}};
                 append(in, params_of(p, "block"));
                 return Probe{in, [=] { return transformer_block(x, p); }};
               }});
  c.push_back({"block", "tca", [](std::uint64_t s) {
                 Rng r(s);
                 auto p = TcaParams::create(6, 4, 2, r);
                 offset_dpe(p);
                 Tensor(p.alpha_raw).mutable_data()[0] = r.normal();
                 Tensor x = randn({6, 6}, r);
                 NamedParams in = {{"x", x}};
                 append(in, params_of(p, "tca"));
                 return Probe{in, [=] { return tca_forward(x, p); }};
               }});
  c.push_back({"block", "memory_read", [](std::uint64_t s) {
                 Rng r(s);
                 const auto bank = MemoryBank::create(3, 6, BankKind::kNormal, r, 0.5);
                 Tensor x = randn({5, 6}, r);
                 return Probe{{{"x", x}, {"slots", bank.slots}}, [=] {
                                const MemoryRead m = memory_read(x, bank);
                                return project({m.scores, m.augmented}, s);
                              }};
               }});
  c.push_back({"block", "nul", [](std::uint64_t s) {
                 Rng r(s);
                 auto p = NulParams::create(6, r);
                 for (Real& w : Tensor(p.logvar_encoder.weight).mutable_data()) w = 0.2 * r.normal();
                 Tensor x = randn({4, 6}, r);
                 NamedParams in = {{"x", x}};
                 append(in, params_of(p, "nul"));
                 return Probe{in, [=] {
                                Rng noise(s);
                                const NulOutput o = nul_forward(x, p, true, noise);
                                return project({o.z, o.kl}, s);
                              }};
               }});
  c.push_back({"block", "urdmu", [](std::uint64_t s) {
                 Rng r(s);
                 const auto p = UrDmuParams::create(8, 2, 3, 1, r);
                 Tensor x = randn({6, 8}, r);
                 NamedParams in = {{"x", x}};
                 append(in, params_of(p, "urdmu"));
                 return Probe{in, [=] {
                                Rng noise(s);
                                const UrDmuOutput o = urdmu_forward(x, p, true, noise);
                                return project({o.features, o.normal_read.scores,
                                                o.abnormal_read.scores, o.nul.kl},
                                               s);
                              }};
               }});

  c.push_back({"block", "rgb_stream", [](std::uint64_t s) {
                 const ModelConfig cfg = tiny_config(s);
                 Rng r(s);
                 const auto p = RgbParams::create(cfg, r);
                 offset_dpe(p.tca);
                 Tensor clip = randn({5, cfg.clip_dim}, r), i3d = randn({5, cfg.rgb_dim}, r);
                 NamedParams in = {{"clip", clip}, {"i3d", i3d}};
                 append(in, params_of(p, "rgb"));
                 return Probe{in, [=] {
                                Rng noise(s);
                                const Stage1Output s1 = rgb_stage1(clip, i3d, p, cfg, true, noise);
                                const Stage2Output s2 =
                                    rgb_stage2(s1.features, s1.context, p, cfg, true, noise);
                                const Tensor s3 = rgb_stage3(s2.features, p, cfg, true, noise);
                                return project({s1.features, s2.features, s3, s2.urdmu->nul.kl}, s);
                              }};
               }});
  c.push_back({"block", "flow_stream", [](std::uint64_t s) {
                 const ModelConfig cfg = tiny_config(s);
                 Rng r(s);
                 const auto p = FlowParams::create(cfg, r);
                 Tensor x = randn({5, cfg.flow_dim}, r);
                 NamedParams in = {{"flow", x}};
                 append(in, params_of(p, "flow"));
                 return Probe{in, [=] { return flow_stream(x, p); }};
               }});
  c.push_back({"block", "audio_stream", [](std::uint64_t s) {
                 const ModelConfig cfg = tiny_config(s);
                 Rng r(s);
                 const auto p = AudioParams::create(cfg, r);
                 Tensor x = randn({5, cfg.audio_dim}, r);
                 NamedParams in = {{"audio", x}};
                 append(in, params_of(p, "audio"));
                 return Probe{in, [=] { return audio_stream(x, p); }};
               }});
  c.push_back({"block", "gated_fusion", [](std::uint64_t s) {
                 const ModelConfig cfg = tiny_config(s);
                 Rng r(s);
                 const auto p = FusionParams::create(cfg, r);
                 std::map<Modality, Tensor> streams;
                 NamedParams in;
                 for (Modality m : {Modality::kRgbI3d, Modality::kFlowI3d, Modality::kAudioVggish}) {
                   streams[m] = randn({5, cfg.hidden_dim}, r);
                   in.emplace_back(std::string(modality_name(m)), streams[m]);
                 }
                 NamedParams fusion;
                 p.collect("fusion", fusion);
                 for (auto& kv : fusion) {
                   if (kv.first.find("classifier") == std::string::npos) in.push_back(kv);
                 }
                 return Probe{in, [=] { return gated_fuse(streams, p).fused; }};
               }});
  c.push_back({"block", "classifier", [](std::uint64_t s) {
                 const ModelConfig cfg = tiny_config(s);
                 Rng r(s);
                 const auto p = Conv1dParams::glorot(cfg.causal_kernel, 12, 1, true, r);
                 Tensor x = randn({6, 12}, r);
                 NamedParams in = {{"fused", x}};
                 append(in, params_of(p, "classifier"));
                 return Probe{in, [=] {
                                const ScoreSeries out = classify(x, p);
                                return project({out.logits, out.scores}, s);
                              }};
               }});
  c.push_back({"block", "full_model", [](std::uint64_t s) {
                 const ModelConfig cfg = tiny_config(s);
                 auto model = std::make_shared<Model>(cfg);
                 offset_dpe(model->rgb.tca);
                 Rng r(s + 1);
                 StreamInputs x{randn({4, cfg.rgb_dim}, r), randn({4, cfg.clip_dim}, r),
                                randn({4, cfg.flow_dim}, r), randn({4, cfg.audio_dim}, r)};
                 NamedParams in = {{"rgb", x.rgb}, {"clip", x.clip}, {"flow", x.flow},
                                   {"audio", x.audio}};
                 append(in, model->named_parameters());
                 return Probe{in, [=] {
                                Rng noise(s);
                                const ForwardOutput o = model->forward(x, true, noise);
                                return project({o.scores, o.clip_branch, o.urdmu->nul.kl}, s);
                              }};
               }});
  return c;
}

std::vector<Case> loss_cases() {
  std::vector<Case> c;
  for (int label : {0, 1}) {
    c.push_back({"loss", label == 0 ? "mil_bag_normal" : "mil_bag_abnormal",
                 [label](std::uint64_t s) {
                   Rng r(s);
                   Tensor p = probabilities({6, 1}, r);
                   return Probe{{{"scores", p}}, [=] { return mil_bag_loss(p, label, 2); }};
                 }});
  }
  c.push_back({"loss", "magnitude_contrast", [](std::uint64_t s) {
                 Rng r(s);
                 Tensor n = randn({5, 4}, r), a = randn({4, 4}, r);
                 // A wide margin keeps the hinge active.
                 return Probe{{{"normal", n}, {"abnormal", a}},
                              [=] { return magnitude_contrast_loss(n, a, 2, 100); }};
               }});
  c.push_back({"loss", "distill", [](std::uint64_t s) {
                 Rng r(s);
                 Tensor st = probabilities({5, 1}, r);
                 const Tensor teacher = probabilities({5, 1}, r).detach();
                 return Probe{{{"student", st}}, [=] { return distill_loss(st, teacher); }};
               }});
  c.push_back({"loss", "dual_memory", [](std::uint64_t s) {
                 Rng r(s);
                 DualMemoryScores m;
                 NamedParams in;
                 for (int v = 0; v < 2; ++v) {
                   m.normal_vs_normal.push_back(probabilities({5, 3}, r));
                   m.normal_vs_abnormal.push_back(probabilities({5, 3}, r));
                   m.abnormal_vs_normal.push_back(probabilities({6, 3}, r));
                   m.abnormal_vs_abnormal.push_back(probabilities({6, 3}, r));
                   const std::string i = std::to_string(v);
                   in.emplace_back("nn" + i, m.normal_vs_normal.back());
                   in.emplace_back("na" + i, m.normal_vs_abnormal.back());
                   in.emplace_back("an" + i, m.abnormal_vs_normal.back());
                   in.emplace_back("aa" + i, m.abnormal_vs_abnormal.back());
                 }
                 return Probe{in, [=] { return dual_memory_loss(m); }};
               }});
  c.push_back({"loss", "total", [](std::uint64_t s) {
                 Rng r(s);
                 LossParts parts{positive(0, 1, r), positive(0, 1, r), positive(0, 1, r),
                                 positive(0, 1, r), positive(0, 1, r)};
                 LossWeights w;
                 w.kd = 0.5;
                 return Probe{{{"mil", parts.mil},
                               {"kd", parts.kd},
                               {"mc", parts.mc},
                               {"dm", parts.dm},
                               {"kl", parts.kl}},
                              [=] { return total_loss(parts, w); }};
               }});
  return c;
}

std::vector<Case> all_cases() {
  std::vector<Case> all = op_cases();
  for (auto& c : block_cases()) all.push_back(std::move(c));
  for (auto& c : loss_cases()) all.push_back(std::move(c));
  return all;
}

}  // namespace

std::vector<std::string> case_names() {
  std::vector<std::string> names;
  for (const Case& c : all_cases()) names.emplace_back(c.name);
  return names;
}

std::vector<CaseResult> run_suite(const SuiteOptions& opts) {
  FiniteDiffOptions fd;
  fd.max_probes = opts.max_probes;
  std::vector<CaseResult> results;
  for (const Case& c : all_cases()) {
    if (!opts.filter.empty() && std::string(c.name).find(opts.filter) == std::string::npos) {
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    CaseResult res{c.group, c.name, opts.seeds, 0.0, "", 0.0, true};
    for (std::size_t i = 0; i < opts.seeds; ++i) {
      const std::uint64_t seed = opts.seed + i;
      const Probe probe = c.build(seed);
      Rng rng(seed * 7919 + 17);
      for (const TensorGradError& e : check_gradients(probe.f, probe.inputs, rng, fd)) {
        if (e.error >= res.max_error) {
          res.max_error = e.error;
          res.worst_input = e.name;
        }
      }
    }
    res.passed = res.max_error < opts.tolerance;
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    results.push_back(std::move(res));
  }
  return results;
}

}  // namespace wsvad::gradcheck
