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

// The multimodal anomaly scorer: a three-stage RGB stream (CLIP + I3D),
// optional flow and audio streams, gated attention fusion and a causal
// convolution classifier that emits one score per snippet.
//
//   stage 1:  X_T = Linear(clip)                      [T x B]
//             X_c = TCA(i3d)                          [T x 1024]
//             X_CNN = Dropout(ReLU(Conv1d(X_c)))      [T x B]
//             F1 = [X_T, X_CNN]                       [T x 2B]
//   stage 2:  F2 = UR-DMU(Linear(F1)) + Linear(X_c)   [T x D_h]
//   stage 3:  F_rgb = 2 x Dropout(GELU(Conv1d_k1(.))) [T x D_h]
//   flow:     Transformer(ReLU(Linear(flow)))         [T x D_h]
//   audio:    Transformer(Linear(audio))              [T x D_h]
//   fusion:   x + MHSA(LN(x)), x = [g_m(t) F_m(t)]_m  [T x n D_h]
//   scores:   sigmoid(CausalConv1d(fused))            [T x 1]

#ifndef WSVAD_MODEL_H_
#define WSVAD_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "wsvad/attention.h"
#include "wsvad/config.h"
#include "wsvad/features.h"
#include "wsvad/layers.h"
#include "wsvad/memory.h"
#include "wsvad/rng.h"
#include "wsvad/tensor.h"

WSVAD_NAMESPACE_BEGIN

// Blocks that can be switched off for ablation studies.
enum class Toggle { kI3d, kTca, kClip, kTopK, kMhsa, kDmu, kPel, kMc, kSs };

inline constexpr Toggle kAllToggles[] = {Toggle::kI3d,  Toggle::kTca, Toggle::kClip,
                                         Toggle::kTopK, Toggle::kMhsa, Toggle::kDmu,
                                         Toggle::kPel,  Toggle::kMc,  Toggle::kSs};

std::string_view toggle_name(Toggle t);
// Accepts "i3d", "tca", "clip", "topk", "mhsa", "dmu", "pel", "mc", "ss"
// (case-insensitive). Throws ConfigError otherwise.
Toggle parse_toggle(std::string_view name);
// Comma-separated list, e.g. "tca,mc". Empty string gives the empty set.
std::set<Toggle> parse_toggles(std::string_view list);

struct ModelConfig {
  std::size_t rgb_dim = 1024;
  std::size_t clip_dim = 512;
  std::size_t flow_dim = 1024;  // 0: no flow stream
  std::size_t audio_dim = 128;  // 0: no audio stream
  std::size_t branch_dim = 512;
  std::size_t tca_dim = 256;
  std::size_t hidden_dim = 128;
  std::size_t heads = 4;
  std::size_t ffn_dim = 256;
  std::size_t memory_slots = 60;
  std::size_t local_radius = 8;
  std::size_t i3d_kernel = 3;
  std::size_t causal_kernel = 2;  // present + previous snippet
  double dropout = 0.1;
  double topk_ratio = 0.3;
  double noise_std = 0.1;
  std::set<Toggle> disabled;
  std::uint64_t seed = 0;

  bool enabled(Toggle t) const { return !disabled.contains(t); }
  std::size_t stream_count() const {
    return 1 + (flow_dim > 0 ? 1 : 0) + (audio_dim > 0 ? 1 : 0);
  }
  std::size_t fused_dim() const { return stream_count() * hidden_dim; }

  // Throws ConfigError on inconsistent widths or out-of-range rates.
  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

struct Nomination {
  std::vector<std::size_t> indices;  // ascending in time
  Tensor selected;                   // rows of the input at `indices`
};

// Scores each snippet by the L2 norm of a clone of `clip` (plus N(0,
// noise_std^2) noise when training) and keeps the k = max(1, round(ratio T))
// largest; ties go to the lower index. Gradients reach the un-noised rows.
Nomination topk_nominate(const Tensor& clip, double ratio, double noise_std, Rng& rng,
                         bool training);

struct RgbParams {
  Linear clip_proj;     // clip -> B
  TcaParams tca;        // on i3d
  Conv1dParams i3d_conv;  // i3d -> B, non-causal
  Linear stage2_proj;   // 2B -> D_h
  UrDmuParams urdmu;
  Linear xc_proj;       // i3d -> D_h
  Conv1dParams mlp1, mlp2;  // D_h -> D_h, kernel 1

  static RgbParams create(const ModelConfig& cfg, Rng& rng);
  void collect(const std::string& prefix, NamedParams& out) const;
};

struct Stage1Output {
  Tensor features;    // F1 = [X_T, X_CNN]
  Tensor clip_branch; // X_T
  Tensor context;     // X_c, the TCA output
};

Stage1Output rgb_stage1(const Tensor& clip, const Tensor& i3d, const RgbParams& p,
                        const ModelConfig& cfg, bool training, Rng& rng);

struct Stage2Output {
  Tensor features;                  // F2
  std::optional<UrDmuOutput> urdmu; // absent when DMU is disabled
};

Stage2Output rgb_stage2(const Tensor& f1, const Tensor& x_c, const RgbParams& p,
                        const ModelConfig& cfg, bool training, Rng& rng);

Tensor rgb_stage3(const Tensor& f2, const RgbParams& p, const ModelConfig& cfg, bool training,
                  Rng& rng);

struct FlowParams {
  Linear mlp;
  TransformerBlockParams block;

  static FlowParams create(const ModelConfig& cfg, Rng& rng);
  void collect(const std::string& prefix, NamedParams& out) const;
};

Tensor flow_stream(const Tensor& flow, const FlowParams& p);

struct AudioParams {
  Linear proj;
  TransformerBlockParams block;

  static AudioParams create(const ModelConfig& cfg, Rng& rng);
  void collect(const std::string& prefix, NamedParams& out) const;
};

Tensor audio_stream(const Tensor& audio, const AudioParams& p);

struct FusionParams {
  std::map<Modality, Linear> gates;  // D_h -> 1 per stream
  LayerNormParams norm;              // pre-attention normalization
  AttentionParams attention;         // over the concatenated width
  Conv1dParams classifier;           // causal, fused width -> 1

  static FusionParams create(const ModelConfig& cfg, Rng& rng);
  void collect(const std::string& prefix, NamedParams& out) const;
};

struct FusionOutput {
  Tensor fused;                    // [T x n D_h]
  std::map<Modality, Tensor> gates;  // [T x 1] each, in (0, 1)
};

// Streams are keyed by the modality that produced them (kRgbI3d stands for
// the whole RGB stream) and concatenated in key order. Throws ContractError
// when `streams` is empty or a stream has no gate.
FusionOutput gated_fuse(const std::map<Modality, Tensor>& streams, const FusionParams& p);

struct ScoreSeries {
  Tensor logits;  // [T x 1]
  Tensor scores;  // sigmoid(logits)
};

ScoreSeries classify(const Tensor& fused, const Conv1dParams& classifier);

// Per-video inputs; undefined tensors mark absent modalities.
struct StreamInputs {
  Tensor rgb;    // [T x rgb_dim]
  Tensor clip;   // [T x clip_dim]
  Tensor flow;   // [T x flow_dim]
  Tensor audio;  // [T x audio_dim]

  std::size_t steps() const { return rgb.rows(); }
};

// Inputs of one crop of a loaded video.
StreamInputs stream_inputs(const VideoBag& video, std::size_t crop);
// Inputs with crops averaged.
StreamInputs mean_crop_inputs(const VideoBag& video);

struct ForwardOutput {
  Tensor scores;       // [T x 1] in [0, 1]
  Tensor logits;
  Tensor clip_branch;  // X_T, fed to the magnitude contrast loss
  Nomination nomination;
  std::optional<UrDmuOutput> urdmu;
  std::map<Modality, Tensor> gates;
};

class Model {
 public:
  // Parameters are initialized from cfg.seed.
  explicit Model(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }

  // Throws DimensionError when an input width disagrees with the config or
  // a configured stream is missing.
  ForwardOutput forward(const StreamInputs& in, bool training, Rng& rng) const;

  // Every parameter with a stable dotted name.
  NamedParams named_parameters() const;

  struct ParamGroup {
    std::string name;  // "rgb", "flow", "audio"
    std::vector<Tensor> params;
  };
  // Fusion and classifier weights go with the flow group.
  std::vector<ParamGroup> param_groups() const;

  // Copies values by name. Throws FormatError on a missing name or a shape
  // mismatch.
  void load_parameters(const NamedParams& values);

  RgbParams rgb;
  std::optional<FlowParams> flow;
  std::optional<AudioParams> audio;
  FusionParams fusion;

 private:
  ModelConfig cfg_;
};

WSVAD_NAMESPACE_END

#endif  // WSVAD_MODEL_H_
