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

#include "wsvad/train.h"

#include <algorithm>
#include <numeric>

#include <spdlog/spdlog.h>

#include "wsvad/errors.h"
#include "wsvad/memory.h"
#include "wsvad/ops.h"
#include "wsvad/optim.h"
#include "wsvad/rng.h"

WSVAD_NAMESPACE_BEGIN

namespace {

Tensor mean_of(const std::vector<Tensor>& terms) {
  if (terms.empty()) return {};
  return affine(sum_scalars(terms), static_cast<Real>(1.0 / static_cast<double>(terms.size())));
}

double value_of(const Tensor& t) { return t.defined() ? static_cast<double>(t.item()) : 0.0; }

nlohmann::json parts_json(double total, double mil, double kd, double mc, double dm, double kl) {
  return {{"total", total}, {"mil", mil}, {"kd", kd}, {"mc", mc}, {"dm", dm}, {"kl", kl}};
}

}  // namespace

void TrainConfig::validate() const {
  if (batch < 2 || batch % 2 != 0) throw ParameterError("batch must be even and at least 2");
  if (epochs == 0) throw ParameterError("epochs must be positive");
  if (!(lr_rgb > 0 && lr_flow > 0 && lr_audio > 0)) {
    throw ParameterError("learning rates must be positive");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"lr_rgb", lr_rgb}, {"lr_flow", lr_flow}, {"lr_audio", lr_audio},
          {"batch", batch},   {"epochs", epochs},   {"seed", seed},
          {"kappa", eval.kappa}, {"use_ss", eval.use_ss}};
}

nlohmann::json StepLog::to_json() const {
  nlohmann::json j = parts_json(total, mil, kd, mc, dm, kl);
  j["epoch"] = epoch;
  j["step"] = step;
  return j;
}

nlohmann::json EpochLog::to_json() const {
  nlohmann::json j = parts_json(total, mil, kd, mc, dm, kl);
  j["epoch"] = epoch;
  if (eval) {
    j["auc"] = eval->to_json()["metrics"]["auc"];
    j["ap"] = eval->to_json()["metrics"]["ap"];
  }
  return j;
}

ModelConfig with_input_dims(ModelConfig cfg, const VideoBag& video) {
  auto width = [&](Modality m) -> std::size_t {
    if (auto it = video.features.find(m); it != video.features.end()) return it->second.dims;
    if (auto it = video.sources.find(m); it != video.sources.end()) {
      return read_feature_header(it->second).dims;
    }
    return 0;
  };
  cfg.rgb_dim = width(Modality::kRgbI3d);
  cfg.clip_dim = width(Modality::kClip);
  cfg.flow_dim = width(Modality::kFlowI3d);
  cfg.audio_dim = width(Modality::kAudioVggish);
  return cfg;
}

TrainResult train(const std::vector<VideoBag>& train_videos,
                  const std::vector<VideoBag>& eval_videos, const ModelConfig& model_cfg,
                  const TrainConfig& cfg, const LossWeights& weights, const Model* teacher,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  weights.validate();
  std::vector<std::size_t> normals, abnormals;
  for (std::size_t i = 0; i < train_videos.size(); ++i) {
    (train_videos[i].label == 0 ? normals : abnormals).push_back(i);
  }
  if (normals.empty() || abnormals.empty()) {
    throw ContractError("train: the training set needs both normal and abnormal videos (got " +
                        std::to_string(normals.size()) + " normal, " +
                        std::to_string(abnormals.size()) + " abnormal)");
  }

  TrainResult result{Model(model_cfg), {}, {}, {}};
  Model& model = result.model;
  const ModelConfig& mc = model.config();
  if (!mc.enabled(Toggle::kPel)) {
    result.warnings.emplace_back("the PEL toggle has no effect: no prompt-based losses are built");
    spdlog::warn("{}", result.warnings.back());
  }
  const bool use_dmu = mc.enabled(Toggle::kDmu);
  const bool use_mc = mc.enabled(Toggle::kMc) && mc.enabled(Toggle::kClip) && weights.mc > 0;
  const bool use_kd = teacher != nullptr;
  LossWeights w = weights;
  if (!use_kd) w.kd = 0;

  Adam optimizer;
  for (auto& group : model.param_groups()) {
    const double lr = group.name == "rgb" ? cfg.lr_rgb
                      : group.name == "audio" ? cfg.lr_audio
                                              : cfg.lr_flow;
    optimizer.add_group(group.name, std::move(group.params), lr);
  }

  const std::size_t half = cfg.batch / 2;
  const std::size_t steps_per_epoch =
      (std::max(normals.size(), abnormals.size()) + half - 1) / half;
  Rng master(cfg.seed);
  std::size_t global_step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng epoch_rng = master.fork();
    epoch_rng.shuffle(normals);
    epoch_rng.shuffle(abnormals);
    EpochLog elog;
    elog.epoch = epoch;

    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      Rng step_rng = epoch_rng.fork();
      std::vector<std::size_t> batch;
      for (std::size_t i = 0; i < half; ++i) {
        batch.push_back(normals[(s * half + i) % normals.size()]);
      }
      for (std::size_t i = 0; i < half; ++i) {
        batch.push_back(abnormals[(s * half + i) % abnormals.size()]);
      }

      optimizer.zero_grad();
      std::vector<Tensor> mil_terms, kd_terms, kl_terms, normal_feats, abnormal_feats;
      DualMemoryScores memory;
      for (std::size_t idx : batch) {
        const VideoBag& video = train_videos[idx];
        for (std::size_t c = 0; c < video.crops(); ++c) {
          const StreamInputs inputs = stream_inputs(video, c);
          const ForwardOutput out = model.forward(inputs, true, step_rng);
          const std::size_t steps = out.scores.numel();
          mil_terms.push_back(mil_bag_loss(out.scores, video.label, bag_topk(steps)));
          if (use_dmu) {
            if (video.label == 0) {
              memory.normal_vs_normal.push_back(out.urdmu->normal_read.scores);
              memory.normal_vs_abnormal.push_back(out.urdmu->abnormal_read.scores);
              kl_terms.push_back(out.urdmu->nul.kl);
            } else {
              memory.abnormal_vs_normal.push_back(out.urdmu->normal_read.scores);
              memory.abnormal_vs_abnormal.push_back(out.urdmu->abnormal_read.scores);
            }
          }
          if (use_mc) {
            const Tensor feats = mc.enabled(Toggle::kTopK)
                                     ? gather_rows(out.clip_branch, out.nomination.indices)
                                     : out.clip_branch;
            (video.label == 0 ? normal_feats : abnormal_feats).push_back(feats);
          }
          if (use_kd) {
            Tensor target;
            {
              NoGradGuard no_grad;
              Rng teacher_rng(0);
              target = teacher->forward(inputs, false, teacher_rng).scores;
            }
            kd_terms.push_back(distill_loss(out.scores, target));
          }
        }
      }

      LossParts parts;
      parts.mil = mean_of(mil_terms);
      if (use_kd) parts.kd = mean_of(kd_terms);
      if (use_dmu) {
        parts.dm = dual_memory_loss(memory);
        parts.kl = mean_of(kl_terms);
      }
      if (use_mc) {
        std::vector<Tensor> pairs;
        const std::size_t n = std::min(normal_feats.size(), abnormal_feats.size());
        for (std::size_t i = 0; i < n; ++i) {
          pairs.push_back(magnitude_contrast_loss(normal_feats[i], abnormal_feats[i], w.mc_topk,
                                                  static_cast<Real>(w.mc_margin)));
        }
        parts.mc = mean_of(pairs);
      }
      const Tensor total = total_loss(parts, w);

      StepLog log{epoch, global_step++, value_of(total), value_of(parts.mil), value_of(parts.kd),
                  value_of(parts.mc),   value_of(parts.dm), value_of(parts.kl)};
      backward(total);
      optimizer.step();
      spdlog::debug("epoch {} step {} loss {:.6f}", epoch, log.step, log.total);
      elog.total += log.total;
      elog.mil += log.mil;
      elog.kd += log.kd;
      elog.mc += log.mc;
      elog.dm += log.dm;
      elog.kl += log.kl;
      result.steps.push_back(log);
    }
    const auto n = static_cast<double>(steps_per_epoch);
    elog.total /= n;
    elog.mil /= n;
    elog.kd /= n;
    elog.mc /= n;
    elog.dm /= n;
    elog.kl /= n;
    if (!eval_videos.empty()) elog.eval = evaluate(model, eval_videos, cfg.eval);
    if (elog.eval) {
      spdlog::info("epoch {:3d} loss {:.4f} (mil {:.4f} mc {:.4f} dm {:.4f} kl {:.4f}) auc {:.4f} ap {:.4f}",
                   epoch, elog.total, elog.mil, elog.mc, elog.dm, elog.kl, elog.eval->auc,
                   elog.eval->ap);
    } else {
      spdlog::info("epoch {:3d} loss {:.4f} (mil {:.4f} mc {:.4f} dm {:.4f} kl {:.4f})", epoch,
                   elog.total, elog.mil, elog.mc, elog.dm, elog.kl);
    }
    if (on_epoch) on_epoch(elog);
    result.epochs.push_back(std::move(elog));
  }
  return result;
}

WSVAD_NAMESPACE_END
