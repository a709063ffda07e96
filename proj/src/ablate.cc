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

#include "wsvad/ablate.h"

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

WSVAD_NAMESPACE_BEGIN

std::vector<AblationRow> run_ablation(const std::vector<VideoBag>& train_videos,
                                      const std::vector<VideoBag>& test_videos,
                                      const ModelConfig& model_cfg, const TrainConfig& cfg,
                                      const LossWeights& weights,
                                      const std::vector<Toggle>& grid) {
  std::vector<AblationRow> rows;
  ModelConfig full_cfg = model_cfg;
  full_cfg.disabled.clear();
  spdlog::info("ablation: training the full model");
  const TrainResult full = train(train_videos, {}, full_cfg, cfg, weights);
  rows.push_back({std::nullopt, evaluate(full.model, test_videos, cfg.eval)});

  for (Toggle t : grid) {
    if (t == Toggle::kSs) {
      EvalOptions opts = cfg.eval;
      opts.use_ss = false;
      rows.push_back({t, evaluate(full.model, test_videos, opts)});
      continue;
    }
    spdlog::info("ablation: training without {}", toggle_name(t));
    ModelConfig c = full_cfg;
    c.disabled.insert(t);
    const TrainResult r = train(train_videos, {}, c, cfg, weights);
    rows.push_back({t, evaluate(r.model, test_videos, cfg.eval)});
  }
  return rows;
}

std::string ablation_markdown(const std::vector<AblationRow>& rows,
                              const std::vector<Toggle>& grid) {
  std::string out = "| run |";
  std::string rule = "|---|";
  for (Toggle t : grid) {
    out += fmt::format(" {} |", toggle_name(t));
    rule += ":-:|";
  }
  out += " AUC | AP |\n" + rule + "--:|--:|\n";
  for (const AblationRow& row : rows) {
    out += row.disabled ? fmt::format("| -{} |", toggle_name(*row.disabled)) : "| full |";
    for (Toggle t : grid) out += (row.disabled == t) ? "   |" : " x |";
    out += fmt::format(" {:.4f} | {:.4f} |\n", row.report.auc, row.report.ap);
  }
  return out;
}

WSVAD_NAMESPACE_END
