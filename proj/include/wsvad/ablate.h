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

// Single-toggle ablation grid: the full model, then one run per disabled
// block, all with the same data, seed and training budget.

#ifndef WSVAD_ABLATE_H_
#define WSVAD_ABLATE_H_

#include <optional>
#include <string>
#include <vector>

#include "wsvad/config.h"
#include "wsvad/evaluate.h"
#include "wsvad/features.h"
#include "wsvad/model.h"
#include "wsvad/objectives.h"
#include "wsvad/train.h"

WSVAD_NAMESPACE_BEGIN

inline const std::vector<Toggle> kDefaultAblationGrid = {
    Toggle::kTca, Toggle::kTopK, Toggle::kMhsa, Toggle::kDmu, Toggle::kMc, Toggle::kSs};

struct AblationRow {
  std::optional<Toggle> disabled;  // empty for the full model
  EvalReport report;
};

// Disabling SS needs no retraining: that row re-evaluates the full model
// without smoothing.
std::vector<AblationRow> run_ablation(const std::vector<VideoBag>& train_videos,
                                      const std::vector<VideoBag>& test_videos,
                                      const ModelConfig& model_cfg, const TrainConfig& cfg,
                                      const LossWeights& weights,
                                      const std::vector<Toggle>& grid);

// One row per run with a check mark per active block, then AUC and AP.
std::string ablation_markdown(const std::vector<AblationRow>& rows,
                              const std::vector<Toggle>& grid);

WSVAD_NAMESPACE_END

#endif  // WSVAD_ABLATE_H_
