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

#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "oracles.h"
#include "util.h"
#include "wsvad/errors.h"
#include "wsvad/model.h"
#include "wsvad/ops.h"

using namespace wsvad;
using testutil::values;

namespace {

void fill(Tensor t, Real v) {
  for (Real& x : t.mutable_data()) x = v;
}

void zero_all(NamedParams params) {
  for (auto& [name, t] : params) fill(t, 0);
}

ModelConfig small_config() {
  ModelConfig c;
  c.rgb_dim = 16;
  c.clip_dim = 8;
  c.flow_dim = 16;
  c.audio_dim = 8;
  c.branch_dim = 8;
  c.tca_dim = 8;
  c.hidden_dim = 8;
  c.heads = 2;
  c.ffn_dim = 16;
  c.memory_slots = 4;
  c.local_radius = 2;
  c.seed = 11;
  return c;
}

StreamInputs random_inputs(const ModelConfig& c, std::size_t T, Rng& rng) {
  StreamInputs in;
  in.rgb = testutil::random({T, c.rgb_dim}, rng);
  in.clip = testutil::random({T, c.clip_dim}, rng);
  if (c.flow_dim) in.flow = testutil::random({T, c.flow_dim}, rng);
  if (c.audio_dim) in.audio = testutil::random({T, c.audio_dim}, rng);
  return in;
}

Tensor identity_kernel(std::size_t width) {
  std::vector<Real> k(width * width, 0);
  for (std::size_t i = 0; i < width; ++i) k[i * width + i] = 1;
  return Tensor::from_values({1, width, width}, k);
}

}  // namespace

TEST_CASE("top-k nomination") {
  Rng rng(1);
  SUBCASE("largest magnitudes") {
    const Tensor clip = Tensor::from_values({4, 2}, {3.2, 0, 0.1, 0, 0, 5.0, 2.2, 0});
    const Nomination n = topk_nominate(clip, 0.5, 0, rng, true);
    CHECK(n.indices == std::vector<std::size_t>{0, 2});
    CHECK(values(n.selected) == std::vector<double>{values(clip)[0], 0, 0, values(clip)[5]});
  }
  SUBCASE("k = T selects everything") {
    const Nomination n = topk_nominate(testutil::random({5, 3}, rng), 1.0, 0, rng, false);
    CHECK(n.indices == std::vector<std::size_t>{0, 1, 2, 3, 4});
  }
  SUBCASE("ties go to the lower index") {
    const Tensor clip = Tensor::from_values({4, 1}, {1, -2, 2, 1});
    CHECK(topk_nominate(clip, 0.5, 0, rng, false).indices == std::vector<std::size_t>{1, 2});
    CHECK(topk_nominate(clip, 0.25, 0, rng, false).indices == std::vector<std::size_t>{1});
    const Tensor flat = Tensor::full({6, 2}, 1);
    CHECK(topk_nominate(flat, 0.5, 0, rng, false).indices == std::vector<std::size_t>{0, 1, 2});
  }
  SUBCASE("empty input") {
    CHECK_THROWS_AS(topk_nominate(Tensor::zeros({0, 3}), 0.5, 0, rng, false), ContractError);
  }
  SUBCASE("sort oracle for every T up to 64") {
    for (std::size_t T = 1; T <= 64; ++T) {
      const Tensor clip = testutil::random({T, 5}, rng);
      std::vector<double> norms(T);
      for (std::size_t t = 0; t < T; ++t) {
        double acc = 0.0;
        for (std::size_t d = 0; d < 5; ++d) acc += clip.at(t, d) * clip.at(t, d);
        norms[t] = std::sqrt(acc);
      }
      for (double ratio : {0.1, 0.3, 0.5, 1.0}) {
        const auto k = std::clamp<std::size_t>(std::size_t(std::lround(ratio * double(T))), 1, T);
        auto want = oracle::topk(norms, k);
        std::sort(want.begin(), want.end());
        CHECK(topk_nominate(clip, ratio, 0, rng, true).indices == want);
      }
    }
  }
}

TEST_CASE("rgb stream stages") {
  const ModelConfig cfg = small_config();
  Rng rng(2);
  RgbParams p = RgbParams::create(cfg, rng);
  const Tensor clip = testutil::random({5, cfg.clip_dim}, rng);
  const Tensor i3d = testutil::random({5, cfg.rgb_dim}, rng);

  SUBCASE("stage 1 concatenates the branches") {
    const Stage1Output s = rgb_stage1(clip, i3d, p, cfg, false, rng);
    CHECK(s.features.shape() == Shape{5, 2 * cfg.branch_dim});
    CHECK(testutil::bitwise_equal(slice_cols(s.features, 0, cfg.branch_dim), p.clip_proj(clip)));
    const Tensor cnn = relu(p.i3d_conv(tca_forward(i3d, p.tca)));
    CHECK(testutil::bitwise_equal(slice_cols(s.features, cfg.branch_dim, 2 * cfg.branch_dim), cnn));
    CHECK(testutil::bitwise_equal(s.clip_branch, p.clip_proj(clip)));
  }
  SUBCASE("stage 1 with both branches zeroed") {
    NamedParams ps;
    p.clip_proj.collect("c", ps);
    p.i3d_conv.collect("i", ps);
    zero_all(ps);
    for (double v : values(rgb_stage1(clip, i3d, p, cfg, true, rng).features)) CHECK(v == 0.0);
  }
  SUBCASE("stage 1 shape errors") {
    CHECK_THROWS_AS(rgb_stage1(testutil::random({5, 3}, rng), i3d, p, cfg, false, rng),
                    DimensionError);
    CHECK_THROWS_AS(rgb_stage1(testutil::random({4, cfg.clip_dim}, rng), i3d, p, cfg, false, rng),
                    DimensionError);
  }
  SUBCASE("stage 2 adds the context projection") {
    const Tensor f1 = testutil::random({5, 2 * cfg.branch_dim}, rng);
    const Tensor xc = testutil::random({5, cfg.rgb_dim}, rng);
    const Stage2Output both = rgb_stage2(f1, xc, p, cfg, false, rng);
    const Stage2Output no_ctx = rgb_stage2(f1, Tensor(), p, cfg, false, rng);
    REQUIRE(both.urdmu.has_value());
    CHECK(testutil::bitwise_equal(no_ctx.features, both.urdmu->features));
    CHECK(testutil::bitwise_equal(both.features, add(both.urdmu->features, p.xc_proj(xc))));

    NamedParams out_map;
    p.urdmu.proj_out.collect("o", out_map);
    zero_all(out_map);
    CHECK(testutil::bitwise_equal(rgb_stage2(f1, xc, p, cfg, false, rng).features, p.xc_proj(xc)));
  }
  SUBCASE("stage 3") {
    const Tensor f2 = testutil::random({5, cfg.hidden_dim}, rng);
    RgbParams q = p;
    q.mlp1 = {identity_kernel(cfg.hidden_dim), Tensor::zeros({cfg.hidden_dim}), false};
    q.mlp2 = {identity_kernel(cfg.hidden_dim), Tensor::zeros({cfg.hidden_dim}), false};
    ModelConfig no_drop = cfg;
    no_drop.dropout = 0;
    CHECK(testutil::bitwise_equal(rgb_stage3(f2, q, no_drop, true, rng), gelu(gelu(f2))));
    NamedParams mlp;
    p.mlp1.collect("a", mlp);
    p.mlp2.collect("b", mlp);
    zero_all(mlp);
    for (double v : values(rgb_stage3(f2, p, cfg, false, rng))) CHECK(v == 0.0);
  }
}

TEST_CASE("flow and audio streams") {
  const ModelConfig cfg = small_config();
  Rng rng(3);
  FlowParams flow = FlowParams::create(cfg, rng);
  AudioParams audio = AudioParams::create(cfg, rng);
  for (double v : values(flow_stream(Tensor::zeros({4, cfg.flow_dim}), flow))) CHECK(v == 0.0);
  for (double v : values(audio_stream(Tensor::zeros({4, cfg.audio_dim}), audio))) CHECK(v == 0.0);

  // A very negative MLP bias silences the flow stream through the ReLU.
  fill(flow.mlp.bias, -1e4);
  for (double v : values(flow_stream(testutil::random({4, cfg.flow_dim}, rng), flow))) CHECK(v == 0.0);
  CHECK_THROWS_AS(flow_stream(Tensor::zeros({4, 3}), flow), DimensionError);
}

TEST_CASE("gated fusion") {
  const ModelConfig cfg = small_config();
  Rng rng(4);
  FusionParams p = FusionParams::create(cfg, rng);
  const Tensor a = testutil::random({4, cfg.hidden_dim}, rng);

  SUBCASE("zero gate weights halve the stream") {
    FusionParams q = p;
    fill(q.gates.at(Modality::kRgbI3d).weight, 0);
    fill(q.gates.at(Modality::kRgbI3d).bias, 0);
    AttentionParams single = AttentionParams::create(cfg.hidden_dim, cfg.heads, rng);
    q.attention = single;
    q.norm = LayerNormParams::identity(cfg.hidden_dim);
    const FusionOutput out = gated_fuse({{Modality::kRgbI3d, a}}, q);
    const Tensor half = affine(a, 0.5);
    CHECK(testutil::bitwise_equal(out.fused, add(half, multi_head(q.norm(half), single))));
    for (double g : values(out.gates.at(Modality::kRgbI3d))) CHECK(g == 0.5);
  }
  SUBCASE("a zero stream leaves a zero block") {
    FusionParams q = p;
    q.attention = AttentionParams::zeros(2 * cfg.hidden_dim, cfg.heads);
    q.norm = LayerNormParams::identity(2 * cfg.hidden_dim);
    q.gates.erase(Modality::kAudioVggish);
    const Tensor zero = Tensor::zeros({4, cfg.hidden_dim});
    const FusionOutput two = gated_fuse({{Modality::kRgbI3d, a}, {Modality::kFlowI3d, zero}}, q);
    const FusionOutput one = gated_fuse({{Modality::kRgbI3d, a}, {Modality::kFlowI3d, a}}, q);
    for (double v : values(slice_cols(two.fused, cfg.hidden_dim, 2 * cfg.hidden_dim))) CHECK(v == 0.0);
    CHECK(testutil::bitwise_equal(slice_cols(two.fused, 0, cfg.hidden_dim),
                                  slice_cols(one.fused, 0, cfg.hidden_dim)));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(gated_fuse({}, p), ContractError);
    FusionParams q = p;
    q.gates.erase(Modality::kFlowI3d);
    CHECK_THROWS_AS(gated_fuse({{Modality::kFlowI3d, a}}, q), ContractError);
  }
  SUBCASE("gates stay inside (0, 1)") {
    for (int trial = 0; trial < 10; ++trial) {
      const FusionOutput out = gated_fuse({{Modality::kRgbI3d, testutil::random({6, 8}, rng, 3)},
                                           {Modality::kFlowI3d, testutil::random({6, 8}, rng, 3)},
                                           {Modality::kAudioVggish, testutil::random({6, 8}, rng, 3)}},
                                          p);
      CHECK(out.fused.shape() == Shape{6, 3 * cfg.hidden_dim});
      for (const auto& [m, g] : out.gates)
        for (double v : values(g)) {
          CHECK(v > 0.0);
          CHECK(v < 1.0);
        }
    }
  }
}

TEST_CASE("classifier") {
  Rng rng(5);
  Conv1dParams clf = Conv1dParams::glorot(3, 6, 1, true, rng);
  const Tensor x = testutil::random({7, 6}, rng);

  SUBCASE("zero logits score one half") {
    Conv1dParams zero = clf;
    zero.kernel = Tensor::zeros(clf.kernel.shape());
    zero.bias = Tensor::zeros({1});
    for (double s : values(classify(x, zero).scores)) CHECK(s == 0.5);
  }
  SUBCASE("perturbing the future leaves past scores alone") {
    const auto base = values(classify(x, clf).scores);
    for (std::size_t t = 0; t + 1 < 7; ++t) {
      Tensor y = Tensor::from_values(x.shape(), {x.data().begin(), x.data().end()});
      for (std::size_t r = t + 1; r < 7; ++r)
        for (std::size_t c = 0; c < 6; ++c) y.mutable_data()[r * 6 + c] += Real(rng.normal());
      const auto s = values(classify(y, clf).scores);
      for (std::size_t r = 0; r <= t; ++r) CHECK(s[r] == base[r]);
    }
  }
  SUBCASE("raising the bias raises every score") {
    const auto base = values(classify(x, clf).scores);
    Conv1dParams up = clf;
    up.bias = affine(clf.bias, 1, 0.5);
    const auto s = values(classify(x, up).scores);
    for (std::size_t t = 0; t < 7; ++t) CHECK(s[t] > base[t]);
  }
}

TEST_CASE("full pipeline") {
  Rng rng(6);
  SUBCASE("T scores in [0, 1] for every stream subset") {
    for (std::size_t flow : {0, 16})
      for (std::size_t audio : {0, 8}) {
        ModelConfig cfg = small_config();
        cfg.flow_dim = flow;
        cfg.audio_dim = audio;
        const Model model(cfg);
        CHECK(model.fusion.classifier.kernel.size(1) == cfg.stream_count() * cfg.hidden_dim);
        for (std::size_t T : {1, 2, 3, 8, 17})
          for (bool training : {false, true}) {
            const ForwardOutput out = model.forward(random_inputs(cfg, T, rng), training, rng);
            CHECK(out.scores.shape() == Shape{T, 1});
            for (double s : values(out.scores)) {
              CHECK(s >= 0.0);
              CHECK(s <= 1.0);
            }
            CHECK(out.gates.size() == cfg.stream_count());
          }
      }
  }
  SUBCASE("missing configured stream") {
    const Model model(small_config());
    StreamInputs in = random_inputs(small_config(), 4, rng);
    in.audio = Tensor();
    CHECK_THROWS_AS(model.forward(in, false, rng), DimensionError);
  }
  SUBCASE("same seed gives the same model and scores") {
    const Model a(small_config()), b(small_config());
    const StreamInputs in = random_inputs(small_config(), 6, rng);
    Rng ra(9), rb(9);
    CHECK(testutil::bitwise_equal(a.forward(in, true, ra).scores, b.forward(in, true, rb).scores));
  }
  SUBCASE("parameter names are unique and grouped") {
    const Model m(small_config());
    const NamedParams params = m.named_parameters();
    std::set<std::string> names;
    for (const auto& [name, t] : params) names.insert(name);
    CHECK(names.size() == params.size());
    std::size_t grouped = 0;
    for (const auto& g : m.param_groups()) grouped += g.params.size();
    CHECK(grouped == params.size());
    CHECK(m.param_groups().size() == 3);
  }
  SUBCASE("disabled blocks still produce scores") {
    for (Toggle t : kAllToggles) {
      ModelConfig cfg = small_config();
      cfg.disabled = {t};
      const Model model(cfg);
      const ForwardOutput out = model.forward(random_inputs(cfg, 5, rng), true, rng);
      CHECK(out.scores.shape() == Shape{5, 1});
      CHECK(out.urdmu.has_value() == (t != Toggle::kDmu));
    }
  }
  SUBCASE("config validation") {
    ModelConfig cfg = small_config();
    cfg.heads = 3;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.topk_ratio = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK_THROWS_AS(parse_toggle("nope"), ConfigError);
    CHECK(parse_toggles("TCA, mc") == std::set<Toggle>{Toggle::kTca, Toggle::kMc});
    const ModelConfig back = ModelConfig::from_json(small_config().to_json());
    CHECK(back.to_json() == small_config().to_json());
  }
}
