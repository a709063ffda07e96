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

#include "wsvad/model.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "wsvad/errors.h"
#include "wsvad/ops.h"

WSVAD_NAMESPACE_BEGIN

using json = nlohmann::json;

namespace {

void require_width(const Tensor& x, std::size_t width, std::string_view what) {
  if (!x.defined()) {
    throw DimensionError(std::string(what) + " input is missing");
  }
  if (x.ndim() != 2 || x.cols() != width) {
    throw DimensionError(std::string(what) + ": expected [T x " + std::to_string(width) +
                         "], got " + shape_string(x.shape()));
  }
}

Tensor gelu_block(const Tensor& x, const Conv1dParams& conv, Real p, bool training, Rng& rng) {
  return dropout(gelu(conv(x)), p, training, rng);
}

}  // namespace

std::string_view toggle_name(Toggle t) {
  switch (t) {
    case Toggle::kI3d: return "i3d";
    case Toggle::kTca: return "tca";
    case Toggle::kClip: return "clip";
    case Toggle::kTopK: return "topk";
    case Toggle::kMhsa: return "mhsa";
    case Toggle::kDmu: return "dmu";
    case Toggle::kPel: return "pel";
    case Toggle::kMc: return "mc";
    case Toggle::kSs: return "ss";
  }
  return "unknown";
}

Toggle parse_toggle(std::string_view name) {
  std::string lower;
  for (char c : name) {
    if (c == '-' || c == '_') continue;
    lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  for (Toggle t : kAllToggles) {
    if (toggle_name(t) == lower) return t;
  }
  throw ConfigError("unknown ablation toggle \"" + std::string(name) + "\"");
}

std::set<Toggle> parse_toggles(std::string_view list) {
  std::set<Toggle> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const std::size_t comma = std::min(list.find(',', pos), list.size());
    std::string_view item = list.substr(pos, comma - pos);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) out.insert(parse_toggle(item));
    pos = comma + 1;
  }
  return out;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("model config: " + msg); };
  if (rgb_dim == 0 || clip_dim == 0) fail("rgb_dim and clip_dim must be positive");
  if (branch_dim == 0 || tca_dim == 0 || hidden_dim == 0 || ffn_dim == 0) {
    fail("layer widths must be positive");
  }
  if (heads < 2 || heads % 2 != 0) fail("heads must be even and at least 2");
  if (hidden_dim % heads != 0) fail("hidden_dim must be divisible by heads");
  if (memory_slots == 0) fail("memory_slots must be positive");
  if (i3d_kernel == 0 || causal_kernel == 0) fail("kernel sizes must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
  if (!(topk_ratio > 0.0 && topk_ratio <= 1.0)) fail("topk_ratio must be in (0, 1]");
  if (!(noise_std >= 0.0)) fail("noise_std must be non-negative");
}

json ModelConfig::to_json() const {
  json disabled_names = json::array();
  for (Toggle t : disabled) disabled_names.push_back(toggle_name(t));
  return {{"rgb_dim", rgb_dim},       {"clip_dim", clip_dim},
          {"flow_dim", flow_dim},     {"audio_dim", audio_dim},
          {"branch_dim", branch_dim}, {"tca_dim", tca_dim},
          {"hidden_dim", hidden_dim}, {"heads", heads},
          {"ffn_dim", ffn_dim},       {"memory_slots", memory_slots},
          {"local_radius", local_radius}, {"i3d_kernel", i3d_kernel},
          {"causal_kernel", causal_kernel}, {"dropout", dropout},
          {"topk_ratio", topk_ratio}, {"noise_std", noise_std},
          {"disabled", disabled_names}, {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  try {
    c.rgb_dim = j.at("rgb_dim").get<std::size_t>();
    c.clip_dim = j.at("clip_dim").get<std::size_t>();
    c.flow_dim = j.at("flow_dim").get<std::size_t>();
    c.audio_dim = j.at("audio_dim").get<std::size_t>();
    c.branch_dim = j.at("branch_dim").get<std::size_t>();
    c.tca_dim = j.at("tca_dim").get<std::size_t>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.ffn_dim = j.at("ffn_dim").get<std::size_t>();
    c.memory_slots = j.at("memory_slots").get<std::size_t>();
    c.local_radius = j.at("local_radius").get<std::size_t>();
    c.i3d_kernel = j.at("i3d_kernel").get<std::size_t>();
    c.causal_kernel = j.at("causal_kernel").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    c.topk_ratio = j.at("topk_ratio").get<double>();
    c.noise_std = j.at("noise_std").get<double>();
    for (const auto& name : j.at("disabled")) c.disabled.insert(parse_toggle(name.get<std::string>()));
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config JSON: ") + e.what());
  }
  c.validate();
  return c;
}

Nomination topk_nominate(const Tensor& clip, double ratio, double noise_std, Rng& rng,
                         bool training) {
  if (clip.ndim() != 2 || clip.rows() == 0) {
    throw ContractError("topk_nominate: needs at least one snippet");
  }
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ParameterError("topk_nominate: ratio must be in (0, 1]");
  const std::size_t steps = clip.rows(), width = clip.cols();
  const auto k = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(ratio * static_cast<double>(steps))), 1, steps);

  const auto values = clip.data();
  std::vector<Real> magnitude(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    double acc = 0.0;
    for (std::size_t d = 0; d < width; ++d) {
      double v = values[t * width + d];
      if (training && noise_std > 0.0) v += noise_std * rng.normal();
      acc += v * v;
    }
    magnitude[t] = static_cast<Real>(std::sqrt(acc));
  }
  Nomination n;
  n.indices = topk_indices(magnitude, k);
  std::sort(n.indices.begin(), n.indices.end());
  n.selected = gather_rows(clip, n.indices);
  return n;
}

RgbParams RgbParams::create(const ModelConfig& cfg, Rng& rng) {
  RgbParams p;
  p.clip_proj = Linear::glorot(cfg.clip_dim, cfg.branch_dim, rng);
  p.tca = TcaParams::create(cfg.rgb_dim, cfg.tca_dim, cfg.local_radius, rng);
  p.i3d_conv = Conv1dParams::glorot(cfg.i3d_kernel, cfg.rgb_dim, cfg.branch_dim, false, rng);
  p.stage2_proj = Linear::glorot(2 * cfg.branch_dim, cfg.hidden_dim, rng);
  p.urdmu = UrDmuParams::create(cfg.hidden_dim, cfg.heads, cfg.memory_slots, cfg.local_radius,
                                rng);
  p.xc_proj = Linear::glorot(cfg.rgb_dim, cfg.hidden_dim, rng);
  p.mlp1 = Conv1dParams::glorot(1, cfg.hidden_dim, cfg.hidden_dim, false, rng);
  p.mlp2 = Conv1dParams::glorot(1, cfg.hidden_dim, cfg.hidden_dim, false, rng);
  return p;
}

void RgbParams::collect(const std::string& prefix, NamedParams& out) const {
  clip_proj.collect(prefix + ".clip_proj", out);
  tca.collect(prefix + ".tca", out);
  i3d_conv.collect(prefix + ".i3d_conv", out);
  stage2_proj.collect(prefix + ".stage2_proj", out);
  urdmu.collect(prefix + ".urdmu", out);
  xc_proj.collect(prefix + ".xc_proj", out);
  mlp1.collect(prefix + ".mlp1", out);
  mlp2.collect(prefix + ".mlp2", out);
}

Stage1Output rgb_stage1(const Tensor& clip, const Tensor& i3d, const RgbParams& p,
                        const ModelConfig& cfg, bool training, Rng& rng) {
  require_width(clip, cfg.clip_dim, "rgb_stage1 clip");
  require_width(i3d, cfg.rgb_dim, "rgb_stage1 i3d");
  if (clip.rows() != i3d.rows()) {
    throw DimensionError("rgb_stage1: clip has " + std::to_string(clip.rows()) +
                         " steps, i3d has " + std::to_string(i3d.rows()));
  }
  const std::size_t steps = clip.rows();
  Stage1Output out;
  out.clip_branch = cfg.enabled(Toggle::kClip) ? p.clip_proj(clip)
                                               : Tensor::zeros({steps, cfg.branch_dim});
  Tensor cnn;
  if (cfg.enabled(Toggle::kI3d)) {
    out.context = cfg.enabled(Toggle::kTca) ? tca_forward(i3d, p.tca) : i3d;
    cnn = dropout(relu(p.i3d_conv(out.context)), static_cast<Real>(cfg.dropout), training, rng);
  } else {
    cnn = Tensor::zeros({steps, cfg.branch_dim});
  }
  const Tensor parts[] = {out.clip_branch, cnn};
  out.features = concat_cols(parts);
  return out;
}

Stage2Output rgb_stage2(const Tensor& f1, const Tensor& x_c, const RgbParams& p,
                        const ModelConfig& cfg, bool training, Rng& rng) {
  Stage2Output out;
  const Tensor projected = p.stage2_proj(f1);
  if (cfg.enabled(Toggle::kDmu)) {
    out.urdmu = urdmu_forward(projected, p.urdmu, training, rng, cfg.enabled(Toggle::kMhsa));
    out.features = out.urdmu->features;
  } else {
    out.features = projected;
  }
  if (x_c.defined()) out.features = add(out.features, p.xc_proj(x_c));
  return out;
}

Tensor rgb_stage3(const Tensor& f2, const RgbParams& p, const ModelConfig& cfg, bool training,
                  Rng& rng) {
  const auto rate = static_cast<Real>(cfg.dropout);
  return gelu_block(gelu_block(f2, p.mlp1, rate, training, rng), p.mlp2, rate, training, rng);
}

FlowParams FlowParams::create(const ModelConfig& cfg, Rng& rng) {
  return {Linear::glorot(cfg.flow_dim, cfg.hidden_dim, rng),
          TransformerBlockParams::create(cfg.hidden_dim, cfg.heads, cfg.ffn_dim, rng)};
}

void FlowParams::collect(const std::string& prefix, NamedParams& out) const {
  mlp.collect(prefix + ".mlp", out);
  block.collect(prefix + ".block", out);
}

Tensor flow_stream(const Tensor& flow, const FlowParams& p) {
  require_width(flow, p.mlp.in_features(), "flow_stream");
  return transformer_block(relu(p.mlp(flow)), p.block);
}

AudioParams AudioParams::create(const ModelConfig& cfg, Rng& rng) {
  return {Linear::glorot(cfg.audio_dim, cfg.hidden_dim, rng),
          TransformerBlockParams::create(cfg.hidden_dim, cfg.heads, cfg.ffn_dim, rng)};
}

void AudioParams::collect(const std::string& prefix, NamedParams& out) const {
  proj.collect(prefix + ".proj", out);
  block.collect(prefix + ".block", out);
}

Tensor audio_stream(const Tensor& audio, const AudioParams& p) {
  require_width(audio, p.proj.in_features(), "audio_stream");
  return transformer_block(p.proj(audio), p.block);
}

FusionParams FusionParams::create(const ModelConfig& cfg, Rng& rng) {
  FusionParams p;
  p.gates.emplace(Modality::kRgbI3d, Linear::glorot(cfg.hidden_dim, 1, rng));
  if (cfg.flow_dim > 0) p.gates.emplace(Modality::kFlowI3d, Linear::glorot(cfg.hidden_dim, 1, rng));
  if (cfg.audio_dim > 0) {
    p.gates.emplace(Modality::kAudioVggish, Linear::glorot(cfg.hidden_dim, 1, rng));
  }
  p.norm = LayerNormParams::identity(cfg.fused_dim());
  p.attention = AttentionParams::create(cfg.fused_dim(), cfg.heads, rng);
  p.classifier = Conv1dParams::glorot(cfg.causal_kernel, cfg.fused_dim(), 1, true, rng);
  return p;
}

void FusionParams::collect(const std::string& prefix, NamedParams& out) const {
  for (const auto& [m, gate] : gates) {
    gate.collect(prefix + ".gate_" + std::string(modality_name(m)), out);
  }
  norm.collect(prefix + ".norm", out);
  attention.collect(prefix + ".attention", out);
  classifier.collect(prefix + ".classifier", out);
}

FusionOutput gated_fuse(const std::map<Modality, Tensor>& streams, const FusionParams& p) {
  if (streams.empty()) throw ContractError("gated_fuse: no streams");
  FusionOutput out;
  std::vector<Tensor> gated;
  for (const auto& [m, x] : streams) {
    auto it = p.gates.find(m);
    if (it == p.gates.end()) {
      throw ContractError("gated_fuse: no gate for stream " + std::string(modality_name(m)));
    }
    const Tensor g = sigmoid(it->second(x));
    out.gates.emplace(m, g);
    gated.push_back(mul_rows(x, g));
  }
  const Tensor concat = concat_cols(gated);
  out.fused = add(concat, multi_head(p.norm(concat), p.attention));
  return out;
}

ScoreSeries classify(const Tensor& fused, const Conv1dParams& classifier) {
  ScoreSeries s;
  s.logits = classifier(fused);
  s.scores = sigmoid(s.logits);
  return s;
}

StreamInputs stream_inputs(const VideoBag& video, std::size_t crop) {
  auto pick = [&](Modality m) -> Tensor {
    auto it = video.features.find(m);
    if (it == video.features.end()) return {};
    const FeatureSequence& seq = it->second;
    return seq.crop(seq.crops == 1 ? 0 : crop);
  };
  return {pick(Modality::kRgbI3d), pick(Modality::kClip), pick(Modality::kFlowI3d),
          pick(Modality::kAudioVggish)};
}

StreamInputs mean_crop_inputs(const VideoBag& video) {
  auto pick = [&](Modality m) -> Tensor {
    auto it = video.features.find(m);
    if (it == video.features.end()) return {};
    return collapse_crops(it->second, CropMode::kMean).front().crop(0);
  };
  return {pick(Modality::kRgbI3d), pick(Modality::kClip), pick(Modality::kFlowI3d),
          pick(Modality::kAudioVggish)};
}

Model::Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(cfg_.seed);
  rgb = RgbParams::create(cfg_, rng);
  if (cfg_.flow_dim > 0) flow = FlowParams::create(cfg_, rng);
  if (cfg_.audio_dim > 0) audio = AudioParams::create(cfg_, rng);
  fusion = FusionParams::create(cfg_, rng);
}

ForwardOutput Model::forward(const StreamInputs& in, bool training, Rng& rng) const {
  require_width(in.rgb, cfg_.rgb_dim, "rgb_i3d");
  require_width(in.clip, cfg_.clip_dim, "clip");
  const std::size_t steps = in.rgb.rows();
  ForwardOutput out;
  out.nomination = topk_nominate(in.clip, cfg_.topk_ratio, cfg_.noise_std, rng, training);

  const Stage1Output s1 = rgb_stage1(in.clip, in.rgb, rgb, cfg_, training, rng);
  out.clip_branch = s1.clip_branch;
  Stage2Output s2 = rgb_stage2(s1.features, s1.context, rgb, cfg_, training, rng);
  out.urdmu = std::move(s2.urdmu);

  std::map<Modality, Tensor> streams;
  streams.emplace(Modality::kRgbI3d, rgb_stage3(s2.features, rgb, cfg_, training, rng));
  if (flow) {
    require_width(in.flow, cfg_.flow_dim, "flow_i3d");
    if (in.flow.rows() != steps) throw DimensionError("flow_i3d: step count differs from rgb");
    streams.emplace(Modality::kFlowI3d, flow_stream(in.flow, *flow));
  }
  if (audio) {
    require_width(in.audio, cfg_.audio_dim, "audio_vggish");
    if (in.audio.rows() != steps) throw DimensionError("audio_vggish: step count differs from rgb");
    streams.emplace(Modality::kAudioVggish, audio_stream(in.audio, *audio));
  }
  FusionOutput fused = gated_fuse(streams, fusion);
  out.gates = std::move(fused.gates);
  ScoreSeries s = classify(fused.fused, fusion.classifier);
  out.scores = s.scores;
  out.logits = s.logits;
  return out;
}

NamedParams Model::named_parameters() const {
  NamedParams out;
  rgb.collect("rgb", out);
  if (flow) flow->collect("flow", out);
  if (audio) audio->collect("audio", out);
  fusion.collect("fusion", out);
  return out;
}

std::vector<Model::ParamGroup> Model::param_groups() const {
  std::vector<ParamGroup> groups;
  auto tensors = [](const NamedParams& named) {
    std::vector<Tensor> t;
    for (const auto& [name, tensor] : named) t.push_back(tensor);
    return t;
  };
  NamedParams named;
  rgb.collect("rgb", named);
  groups.push_back({"rgb", tensors(named)});
  named.clear();
  if (flow) flow->collect("flow", named);
  fusion.collect("fusion", named);
  groups.push_back({"flow", tensors(named)});
  if (audio) {
    named.clear();
    audio->collect("audio", named);
    groups.push_back({"audio", tensors(named)});
  }
  return groups;
}

void Model::load_parameters(const NamedParams& values) {
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : values) by_name.emplace(name, &t);
  for (auto& [name, param] : named_parameters()) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("checkpoint lacks parameter " + name);
    const Tensor& src = *it->second;
    if (src.shape() != param.shape()) {
      throw FormatError("parameter " + name + ": checkpoint shape " + shape_string(src.shape()) +
                        " differs from model shape " + shape_string(param.shape()));
    }
    std::copy(src.data().begin(), src.data().end(), param.mutable_data().begin());
  }
}

WSVAD_NAMESPACE_END
