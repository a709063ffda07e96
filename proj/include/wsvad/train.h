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

// The training loop: label-balanced batches, per-stream Adam groups and the
// combined objective.

#ifndef WSVAD_TRAIN_H_
#define WSVAD_TRAIN_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "wsvad/config.h"
#include "wsvad/evaluate.h"
#include "wsvad/features.h"
#include "wsvad/model.h"
#include "wsvad/objectives.h"

WSVAD_NAMESPACE_BEGIN

struct TrainConfig {
  double lr_rgb = 1e-6;
  double lr_flow = 3e-5;
  double lr_audio = 3e-5;
  std::size_t batch = 32;  // half normal, half abnormal
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  EvalOptions eval;

  // Throws ParameterError on an odd or zero batch, zero epochs or a
  // non-positive learning rate.
  void validate() const;
  nlohmann::json to_json() const;
};

// Loss parts of one optimizer step (weighted terms are reported unweighted).
struct StepLog {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double total = 0, mil = 0, kd = 0, mc = 0, dm = 0, kl = 0;

  nlohmann::json to_json() const;
};

struct EpochLog {
  std::size_t epoch = 0;
  double total = 0, mil = 0, kd = 0, mc = 0, dm = 0, kl = 0;  // means over steps
  std::optional<EvalReport> eval;

  nlohmann::json to_json() const;
};

struct TrainResult {
  Model model;
  std::vector<StepLog> steps;
  std::vector<EpochLog> epochs;
  std::vector<std::string> warnings;
};

// Widths of the streams present in `video`; missing flow or audio gives a
// width of 0 (stream disabled).
ModelConfig with_input_dims(ModelConfig cfg, const VideoBag& video);

using EpochCallback = std::function<void(const EpochLog&)>;

// Trains a model of configuration `model_cfg` on loaded videos. Each epoch
// reshuffles both label groups and walks ceil(max(N_normal, N_abnormal) /
// (batch / 2)) steps, cycling the smaller group. Multi-crop videos
// contribute every crop as its own bag. With a teacher, the distillation
// term compares against its eval-mode scores. `eval_videos` (may be empty)
// are evaluated after every epoch. Throws ContractError unless both labels
// are present.
TrainResult train(const std::vector<VideoBag>& train_videos,
                  const std::vector<VideoBag>& eval_videos, const ModelConfig& model_cfg,
                  const TrainConfig& cfg, const LossWeights& weights,
                  const Model* teacher = nullptr, const EpochCallback& on_epoch = {});

WSVAD_NAMESPACE_END

#endif  // WSVAD_TRAIN_H_
