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
#include <fstream>
#include <vector>

#include "doctest.h"
#include "oracles.h"
#include "util.h"
#include "wsvad/checkpoint.h"
#include "wsvad/errors.h"
#include "wsvad/evaluate.h"
#include "wsvad/metrics.h"
#include "wsvad/train.h"

using namespace wsvad;
using testutil::values;

namespace {

SynthSpec small_synth(std::uint64_t seed) {
  SynthSpec s;
  s.n_normal = s.n_abnormal = 6;
  s.n_test_normal = s.n_test_abnormal = 4;
  s.dims = {{Modality::kRgbI3d, 32},
            {Modality::kClip, 16},
            {Modality::kFlowI3d, 32},
            {Modality::kAudioVggish, 8}};
  s.seed = seed;
  return s;
}

ModelConfig small_model(const VideoBag& sample) {
  ModelConfig c;
  c.branch_dim = 16;
  c.tca_dim = 16;
  c.hidden_dim = 16;
  c.heads = 2;
  c.ffn_dim = 32;
  c.memory_slots = 8;
  c.seed = 3;
  return with_input_dims(c, sample);
}

std::vector<std::uint8_t> random_labels(std::size_t n, Rng& rng) {
  std::vector<std::uint8_t> y(n);
  for (auto& v : y) v = rng.uniform() < 0.4;
  y[0] = 1;
  y[n - 1] = 0;
  return y;
}

std::vector<double> random_scores(std::size_t n, Rng& rng) {
  std::vector<double> s(n);
  // Coarse values so ties occur often.
  for (auto& v : s) v = rng.uniform() < 0.3 ? double(rng.below(4)) / 4 : rng.uniform();
  return s;
}

}  // namespace

TEST_CASE("smoothing") {
  const std::vector<double> s = {0.3, 0.9, 0.1, 0.4, 0.8};
  CHECK(smooth_scores(s, 1) == s);
  const std::vector<double> alt = {0, 1, 0, 1};
  CHECK(smooth_scores(alt, 2) == std::vector<double>{0.5, 0.5, 0.5, 1.0});
  const std::vector<double> flat(6, 0.37);
  for (std::size_t k : {1, 2, 5, 9, 20})
    for (double v : smooth_scores(flat, k)) CHECK(v == doctest::Approx(0.37).epsilon(1e-15));
  CHECK_THROWS_AS(smooth_scores(s, 0), ParameterError);

  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = random_scores(1 + rng.below(30), rng);
    const std::size_t k = 1 + rng.below(12);
    const auto y = smooth_scores(x, k);
    CHECK(testutil::max_abs_diff(y, oracle::smooth(x, k)) < 1e-12);
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    for (double v : y) {
      CHECK(v >= *lo - 1e-15);
      CHECK(v <= *hi + 1e-15);
    }
  }
}

TEST_CASE("frame expansion") {
  auto counts = [](const std::vector<double>& frames, std::size_t T) {
    std::vector<std::size_t> c(T, 0);
    for (double f : frames) ++c[std::size_t(f)];
    return c;
  };
  CHECK(counts(expand_to_frames(std::vector<double>{0, 1}, 32), 2) == std::vector<std::size_t>{16, 16});
  CHECK(counts(expand_to_frames(std::vector<double>{0}, 20), 1) == std::vector<std::size_t>{20});
  CHECK(counts(expand_to_frames(std::vector<double>{0, 1, 2}, 40), 3) ==
        std::vector<std::size_t>{16, 16, 8});
  const auto order = expand_to_frames(std::vector<double>{0, 1, 2}, 40);
  CHECK(std::is_sorted(order.begin(), order.end()));
  CHECK_THROWS_AS(expand_to_frames(std::vector<double>{0, 1, 2}, 32), ContractError);
}

TEST_CASE("metric examples") {
  const std::vector<double> sep = {0.1, 0.2, 0.8, 0.9};
  const std::vector<std::uint8_t> lab = {0, 0, 1, 1};
  CHECK(roc_auc(sep, lab) == 1.0);
  CHECK(roc_auc(std::vector<double>(4, 0.3), lab) == 0.5);
  CHECK_THROWS_AS(roc_auc(sep, std::vector<std::uint8_t>(4, 1)), UndefinedMetricError);

  CHECK(average_precision(std::vector<double>{0.9, 0.1}, std::vector<std::uint8_t>{1, 0}) == 1.0);
  CHECK(average_precision(std::vector<double>{0.9, 0.1}, std::vector<std::uint8_t>{0, 1}) == 0.5);
  CHECK_THROWS_AS(average_precision(sep, std::vector<std::uint8_t>(4, 0)), UndefinedMetricError);

  CHECK(false_alarm_rate(std::vector<double>(5, 0.1)) == 0.0);
  CHECK(false_alarm_rate(std::vector<double>(5, 0.9)) == 1.0);
  CHECK(false_alarm_rate(std::vector<double>{0.4, 0.6, 0.7, 0.2}) == 0.5);
  CHECK(false_alarm_rate(std::vector<double>{}) == 0.0);
}

TEST_CASE("metrics match brute-force oracles") {
  Rng rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(49);
    const auto s = random_scores(n, rng);
    const auto y = random_labels(n, rng);
    CHECK(std::abs(roc_auc(s, y) - oracle::auc_pairs(s, y)) <= 1e-12);
    CHECK(std::abs(average_precision(s, y) - oracle::ap_ranks(s, y)) <= 1e-12);
    const double auc = roc_auc(s, y), ap = average_precision(s, y);
    CHECK(auc >= 0.0);
    CHECK(auc <= 1.0);
    CHECK(ap > 0.0);
    CHECK(ap <= 1.0);
  }
}

TEST_CASE("AUC is invariant under monotone transforms") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(40);
    const auto s = random_scores(n, rng);
    const auto y = random_labels(n, rng);
    std::vector<double> ex, tenfold;
    for (double v : s) {
      ex.push_back(std::exp(v));
      tenfold.push_back(10 * v);
    }
    CHECK(roc_auc(ex, y) == roc_auc(s, y));
    CHECK(roc_auc(tenfold, y) == roc_auc(s, y));
  }
}

TEST_CASE("evaluating oracle scores") {
  SynthSpec spec = small_synth(4);
  spec.n_normal = spec.n_abnormal = 20;
  const SynthDataset data = generate_synth(spec);
  EvalOptions plain;
  plain.use_ss = false;
  const EvalReport r = evaluate_scores(data.videos, data.oracle_scores, plain);
  CHECK(r.auc == doctest::Approx(data.oracle_auc).epsilon(1e-12));
  CHECK(r.kappa == 1);
  std::size_t frames = 0;
  for (const auto& v : data.videos) frames += v.frames();
  CHECK(r.frames == frames);

  SUBCASE("window 2 costs little on synthetic data") {
    EvalOptions two;
    two.kappa = 2;
    const EvalReport s = evaluate_scores(data.videos, data.oracle_scores, two);
    MESSAGE("oracle frame AUC " << r.auc << " -> " << s.auc << " with kappa 2");
    CHECK(r.auc - s.auc <= 0.02);
  }
  SUBCASE("window 1 is the identity") {
    EvalOptions one;
    one.kappa = 1;
    const EvalReport s = evaluate_scores(data.videos, data.oracle_scores, one);
    CHECK(s.auc == r.auc);
    CHECK(s.ap == r.ap);
  }
  SUBCASE("frame scores line up with frame labels") {
    for (const VideoScores& v : r.videos) CHECK(v.frame_scores.size() == v.frame_labels.size());
  }
}

TEST_CASE("anomaly AUC protocol") {
  // One normal video, one abnormal video whose first half is anomalous.
  VideoBag normal, abnormal;
  normal.video_id = "n";
  normal.frame_count = 32;
  abnormal.video_id = "a";
  abnormal.label = 1;
  abnormal.frame_count = 32;
  abnormal.anomaly_segments = {{0, 16}};
  EvalOptions plain;
  plain.use_ss = false;
  // The normal part of the abnormal video scores highest: it hurts `auc` but
  // is left out of `anomaly_auc`.
  const EvalReport r = evaluate_scores({normal, abnormal}, {{0.2, 0.3}, {0.6, 0.9}}, plain);
  CHECK(r.anomaly_auc == 1.0);
  CHECK(r.auc == doctest::Approx(2.0 / 3.0));
  CHECK(r.far == 0.0);
}

TEST_CASE("model evaluation and checkpoints") {
  const SynthDataset data = generate_synth(small_synth(5));
  const auto train_set = filter_split(data.videos, Split::kTrain);
  const auto test_set = filter_split(data.videos, Split::kTest);
  TrainConfig tc;
  tc.lr_rgb = tc.lr_flow = tc.lr_audio = 1e-3;
  tc.batch = 4;
  tc.epochs = 2;
  const TrainResult trained = train(train_set, {}, small_model(train_set.front()), tc, LossWeights{});

  const EvalReport first = evaluate(trained.model, test_set, EvalOptions{});
  const EvalReport again = evaluate(trained.model, test_set, EvalOptions{});
  CHECK(first.to_json().dump() == again.to_json().dump());
  for (const VideoScores& v : first.videos)
    for (double s : v.frame_scores) {
      CHECK(s >= 0.0);
      CHECK(s <= 1.0);
    }
  CHECK_THROWS_AS(evaluate(trained.model, {}, EvalOptions{}), ContractError);

  testutil::TempDir dir("eval_ckpt");
  const auto path = dir.path() / "model.wsck";
  save_checkpoint(trained.model, path, {{"note", "round trip"}});
  const LoadedCheckpoint loaded = load_checkpoint(path);
  CHECK(loaded.meta.at("note") == "round trip");
  CHECK(loaded.model.config().to_json() == trained.model.config().to_json());
  const auto pa = trained.model.named_parameters(), pb = loaded.model.named_parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].first == pb[i].first);
    CHECK(testutil::bitwise_equal(pa[i].second, pb[i].second));
  }
  CHECK(evaluate(loaded.model, test_set, EvalOptions{}).to_json().dump() == first.to_json().dump());

  SUBCASE("csv export") {
    EvalReport r = first;
    write_score_csvs(r, dir.path() / "csv");
    for (const VideoScores& v : r.videos) {
      std::ifstream in(v.csv_path);
      REQUIRE(in);
      std::string header;
      std::getline(in, header);
      CHECK(header == "frame,score,label");
      std::size_t lines = 0;
      for (std::string line; std::getline(in, line);) ++lines;
      CHECK(lines == v.frame_scores.size());
    }
  }
  SUBCASE("corrupt checkpoints") {
    std::ifstream in(path, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), {});
    auto write = [&](const std::vector<char>& b) {
      std::ofstream(path, std::ios::binary | std::ios::trunc).write(b.data(), std::streamsize(b.size()));
    };
    auto bad = bytes;
    bad[0] = 'X';
    write(bad);
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
    bad = bytes;
    bad.resize(bytes.size() / 2);
    write(bad);
    CHECK_THROWS_AS(load_checkpoint(path), Error);
    CHECK_THROWS_AS(load_checkpoint(dir.path() / "missing.wsck"), IoError);
  }
}
