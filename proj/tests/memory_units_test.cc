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
#include <vector>

#include "doctest.h"
#include "oracles.h"
#include "util.h"
#include "wsvad/errors.h"
#include "wsvad/memory.h"
#include "wsvad/ops.h"
#include "wsvad/optim.h"

using namespace wsvad;
using testutil::values;

namespace {

void fill(Tensor t, Real v) {
  for (Real& x : t.mutable_data()) x = v;
}

MemoryBank bank_of(const Tensor& slots, BankKind kind = BankKind::kNormal) {
  return {slots, kind};
}

}  // namespace

TEST_CASE("memory read examples") {
  Rng rng(1);
  SUBCASE("zero input") {
    const MemoryBank bank = MemoryBank::create(3, 4, BankKind::kNormal, rng, 1.0);
    const MemoryRead r = memory_read(Tensor::zeros({2, 4}), bank);
    for (double s : values(r.scores)) CHECK(s == 0.5);
    for (std::size_t t = 0; t < 2; ++t)
      for (std::size_t c = 0; c < 4; ++c) {
        double colsum = 0.0;
        for (std::size_t k = 0; k < 3; ++k) colsum += bank.slots.at(k, c);
        CHECK(r.augmented.at(t, c) == doctest::Approx(0.5 * colsum).epsilon(1e-6));
      }
  }
  SUBCASE("saturation") {
    const Tensor s = Tensor::from_values({1, 4}, {0.5, -1, 2, 0.25});
    const MemoryRead r = memory_read(affine(s, 1000), bank_of(s));
    CHECK(r.scores.item() == doctest::Approx(1.0));
    CHECK(testutil::max_abs_diff(values(r.augmented), values(s)) < 1e-6);
  }
  SUBCASE("loop oracle") {
    for (std::size_t K : {1, 2, 5}) {
      const Tensor x = testutil::random({3, 4}, rng), slots = testutil::random({K, 4}, rng);
      const MemoryRead r = memory_read(x, bank_of(slots));
      const auto want = oracle::memory_read(values(x), values(slots), 3, K, 4);
      CHECK(testutil::max_abs_diff(values(r.scores), want.scores) < 1e-6);
      CHECK(testutil::max_abs_diff(values(r.augmented), want.augmented) < 1e-5);
      for (double v : values(r.scores)) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
      }
      CHECK(testutil::bitwise_equal(r.augmented, matmul(r.scores, slots)));
    }
  }
  SUBCASE("width mismatch") {
    CHECK_THROWS_AS(memory_read(Tensor::zeros({2, 3}), MemoryBank::create(2, 4, BankKind::kNormal, rng)),
                    DimensionError);
  }
}

TEST_CASE("memory top-k") {
  CHECK(memory_topk(1) == 1);
  CHECK(memory_topk(2) == 2);
  CHECK(memory_topk(16) == 2);
  CHECK(memory_topk(17) == 3);
  CHECK(memory_topk(160) == 11);
}

TEST_CASE("dual memory loss") {
  DualMemoryScores s;
  SUBCASE("perfect scores") {
    s.normal_vs_normal = {Tensor::full({4, 3}, 1)};
    s.normal_vs_abnormal = {Tensor::full({4, 3}, 0)};
    s.abnormal_vs_normal = {Tensor::full({5, 3}, 1)};
    s.abnormal_vs_abnormal = {Tensor::full({5, 3}, 1)};
    CHECK(dual_memory_loss(s, 2).item() < 1e-5);
  }
  SUBCASE("chance normal scores cost ln 2") {
    s.normal_vs_normal = {Tensor::full({4, 3}, 0.5)};
    s.normal_vs_abnormal = {Tensor::full({4, 3}, 0)};
    CHECK(dual_memory_loss(s, 1).item() == doctest::Approx(std::log(2.0)).epsilon(1e-5));
  }
  SUBCASE("top-k longer than the video") {
    s.abnormal_vs_normal = {Tensor::full({2, 3}, 0.5)};
    s.abnormal_vs_abnormal = {Tensor::full({2, 3}, 0.5)};
    CHECK_THROWS_AS(dual_memory_loss(s, 3), ContractError);
  }
  SUBCASE("bounded below and finite") {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
      auto probs = [&](std::size_t T) {
        std::vector<Real> v(T * 3);
        for (auto& x : v) x = static_cast<Real>(rng.uniform() < 0.2 ? (rng.uniform() < 0.5 ? 0 : 1) : rng.uniform());
        return Tensor::from_values({T, 3}, v);
      };
      s.normal_vs_normal = {probs(3), probs(6)};
      s.normal_vs_abnormal = {probs(3), probs(6)};
      s.abnormal_vs_normal = {probs(4)};
      s.abnormal_vs_abnormal = {probs(4)};
      const double l = dual_memory_loss(s).item();
      CHECK(std::isfinite(l));
      CHECK(l >= 0.0);
    }
  }
}

TEST_CASE("dual memory loss is learnable on separable features") {
  // Normal snippets point along e_0, abnormal ones along e_1; only the banks
  // are trained. The margin is wide because Adam steps shrink as the sigmoid
  // saturates: at norm 30 the loss is still 6e-3 after 500 steps.
  Rng rng(3);
  const std::size_t D = 8, T = 6;
  auto feats = [&](std::size_t axis) {
    Tensor x = testutil::random({T, D}, rng, 0.1);
    for (std::size_t t = 0; t < T; ++t) x.mutable_data()[t * D + axis] += 300;
    return x;
  };
  const std::vector<Tensor> normal = {feats(0), feats(0)}, abnormal = {feats(1), feats(1)};
  MemoryBank nb = MemoryBank::create(4, D, BankKind::kNormal, rng);
  MemoryBank ab = MemoryBank::create(4, D, BankKind::kAbnormal, rng);
  AdamState st;
  st.lr = 1e-2;
  std::vector<Tensor> params = {nb.slots, ab.slots};
  double loss = INFINITY;
  int steps = 0;
  for (; steps < 500 && loss >= 1e-3; ++steps) {
    DualMemoryScores s;
    for (const Tensor& x : normal) {
      s.normal_vs_normal.push_back(memory_read(x, nb).scores);
      s.normal_vs_abnormal.push_back(memory_read(x, ab).scores);
    }
    for (const Tensor& x : abnormal) {
      s.abnormal_vs_normal.push_back(memory_read(x, nb).scores);
      s.abnormal_vs_abnormal.push_back(memory_read(x, ab).scores);
    }
    const Tensor l = dual_memory_loss(s);
    loss = l.item();
    backward(l);
    adam_step(params, st);
  }
  MESSAGE("dual memory loss " << loss << " after " << steps << " steps");
  CHECK(loss < 1e-3);
}

TEST_CASE("nul") {
  Rng rng(4);
  NulParams p = NulParams::create(2, rng);
  fill(p.mean_encoder.weight, 0);
  fill(p.logvar_encoder.weight, 0);
  fill(p.logvar_encoder.bias, 0);
  const Tensor x = testutil::random({3, 2}, rng);

  SUBCASE("standard normal has zero KL") {
    fill(p.mean_encoder.bias, 0);
    CHECK(nul_forward(x, p, false, rng).kl.item() == 0);
  }
  SUBCASE("unit mean costs half the squared norm") {
    fill(p.mean_encoder.bias, 1);
    CHECK(nul_forward(x, p, true, rng).kl.item() == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("eval mode returns the mean") {
    const NulParams q = NulParams::create(2, rng);
    const NulOutput out = nul_forward(x, q, false, rng);
    CHECK(testutil::bitwise_equal(out.z, out.mean));
    CHECK(std::isfinite(out.kl.item()));
  }
  SUBCASE("KL is non-negative") {
    for (int trial = 0; trial < 50; ++trial) {
      NulParams q;
      q.mean_encoder = Linear{testutil::random({2, 2}, rng), testutil::random({2}, rng)};
      q.logvar_encoder = Linear{testutil::random({2, 2}, rng), testutil::random({2}, rng)};
      CHECK(nul_forward(x, q, true, rng).kl.item() >= -1e-9);
    }
  }
}

TEST_CASE("urdmu") {
  Rng rng(5);
  UrDmuParams p = UrDmuParams::create(8, 2, 3, 2, rng);

  SUBCASE("zero input reads half of every slot") {
    fill(p.nul.mean_encoder.weight, 0);
    fill(p.nul.logvar_encoder.weight, 0);
    const UrDmuOutput out = urdmu_forward(Tensor::zeros({4, 8}), p, false, rng);
    std::vector<Real> half(8, 0);
    for (std::size_t c = 0; c < 8; ++c)
      for (std::size_t k = 0; k < 3; ++k)
        half[c] += static_cast<Real>(0.5 * (p.normal.slots.at(k, c) + p.abnormal.slots.at(k, c)));
    const auto row = values(p.proj_out(Tensor::from_values({1, 8}, half)));
    const auto y = values(out.features);
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t c = 0; c < 8; ++c) {
        CHECK(std::isfinite(y[t * 8 + c]));
        CHECK(y[t * 8 + c] == doctest::Approx(row[c]).epsilon(1e-5));
      }
  }
  SUBCASE("eval mode is deterministic and draws nothing") {
    const Tensor x = testutil::random({5, 8}, rng);
    Rng a(1), b(2);
    const UrDmuOutput first = urdmu_forward(x, p, false, a);
    const UrDmuOutput second = urdmu_forward(x, p, false, b);
    CHECK(testutil::bitwise_equal(first.features, second.features));
    CHECK(a.uniform() == Rng(1).uniform());
  }
  SUBCASE("shapes") {
    const UrDmuOutput out = urdmu_forward(testutil::random({5, 8}, rng), p, true, rng);
    CHECK(out.features.shape() == Shape{5, 8});
    CHECK(out.normal_read.scores.shape() == Shape{5, 3});
    CHECK(out.abnormal_read.scores.shape() == Shape{5, 3});
  }
}
