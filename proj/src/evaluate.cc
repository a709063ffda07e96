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

#include "wsvad/evaluate.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <spdlog/spdlog.h>

#include "wsvad/errors.h"
#include "wsvad/metrics.h"
#include "wsvad/rng.h"

WSVAD_NAMESPACE_BEGIN

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double metric_or_nan(auto&& fn) {
  try {
    return fn();
  } catch (const UndefinedMetricError&) {
    return kNaN;
  }
}

nlohmann::json number_or_null(double v) {
  return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v);
}

}  // namespace

std::vector<double> smooth_scores(std::span<const double> scores, std::size_t kappa) {
  if (kappa == 0) throw ParameterError("smoothing window must be at least 1");
  const std::size_t n = scores.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t end = std::min(n, i + kappa);
    double acc = 0.0;
    for (std::size_t j = i; j < end; ++j) acc += scores[j];
    out[i] = acc / static_cast<double>(end - i);
  }
  return out;
}

std::vector<double> expand_to_frames(std::span<const double> scores, std::uint64_t n_frames,
                                     std::size_t delta) {
  if (scores.empty()) throw ContractError("expand_to_frames: no snippet scores");
  if (delta == 0) throw ParameterError("expand_to_frames: delta must be positive");
  const std::uint64_t covered = scores.size() * delta;
  if (n_frames + delta < covered + 1) {
    throw ContractError("expand_to_frames: " + std::to_string(n_frames) + " frames cannot hold " +
                        std::to_string(scores.size()) + " snippets of " + std::to_string(delta));
  }
  if (n_frames < covered) {
    spdlog::warn("expand_to_frames: truncating {} snippet frames to {}", covered, n_frames);
  }
  std::vector<double> out(n_frames);
  for (std::uint64_t f = 0; f < n_frames; ++f) {
    out[f] = scores[std::min<std::uint64_t>(f / delta, scores.size() - 1)];
  }
  return out;
}

std::vector<double> score_video(const Model& model, const VideoBag& video) {
  NoGradGuard no_grad;
  Rng rng(0);
  const std::size_t crops = video.crops();
  std::vector<double> acc;
  for (std::size_t c = 0; c < crops; ++c) {
    const ForwardOutput out = model.forward(stream_inputs(video, c), false, rng);
    // The sigmoid is redone in double: in float it rounds to exactly 1 for
    // logits above ~17, which ties confident snippets.
    const auto z = out.logits.data();
    if (acc.empty()) acc.assign(z.size(), 0.0);
    for (std::size_t t = 0; t < z.size(); ++t) {
      acc[t] += 1.0 / (1.0 + std::exp(-static_cast<double>(z[t])));
    }
  }
  for (double& v : acc) v /= static_cast<double>(crops);
  return acc;
}

EvalReport evaluate_scores(const std::vector<VideoBag>& videos,
                           const std::vector<std::vector<double>>& snippet_scores,
                           const EvalOptions& opts) {
  if (videos.empty()) throw ContractError("evaluate: no videos");
  if (videos.size() != snippet_scores.size()) {
    throw ContractError("evaluate: score series count differs from video count");
  }
  EvalReport report;
  report.kappa = opts.use_ss ? opts.kappa : 1;

  std::vector<double> all_scores, anomaly_scores, normal_scores;
  std::vector<std::uint8_t> all_labels, anomaly_labels;
  for (std::size_t i = 0; i < videos.size(); ++i) {
    const VideoBag& v = videos[i];
    VideoScores vs;
    vs.video_id = v.video_id;
    vs.label = v.label;
    vs.snippet_scores = snippet_scores[i];
    const std::vector<double> smoothed = smooth_scores(vs.snippet_scores, report.kappa);
    vs.frame_scores = expand_to_frames(smoothed, v.frames());
    vs.frame_labels = v.frame_labels();

    all_scores.insert(all_scores.end(), vs.frame_scores.begin(), vs.frame_scores.end());
    all_labels.insert(all_labels.end(), vs.frame_labels.begin(), vs.frame_labels.end());
    for (std::size_t f = 0; f < vs.frame_scores.size(); ++f) {
      if (v.label == 0) {
        normal_scores.push_back(vs.frame_scores[f]);
        anomaly_scores.push_back(vs.frame_scores[f]);
        anomaly_labels.push_back(0);
      } else if (vs.frame_labels[f] != 0) {
        anomaly_scores.push_back(vs.frame_scores[f]);
        anomaly_labels.push_back(1);
      }
    }
    report.videos.push_back(std::move(vs));
  }
  report.frames = all_scores.size();
  report.auc = metric_or_nan([&] { return roc_auc(all_scores, all_labels); });
  report.anomaly_auc = metric_or_nan([&] { return roc_auc(anomaly_scores, anomaly_labels); });
  report.ap = metric_or_nan([&] { return average_precision(all_scores, all_labels); });
  report.far = normal_scores.empty() ? kNaN : false_alarm_rate(normal_scores, opts.far_threshold);
  return report;
}

EvalReport evaluate(const Model& model, const std::vector<VideoBag>& videos,
                    const EvalOptions& opts) {
  if (videos.empty()) throw ContractError("evaluate: no videos");
  std::vector<std::vector<double>> scores;
  scores.reserve(videos.size());
  for (const VideoBag& v : videos) scores.push_back(score_video(model, v));
  EvalOptions effective = opts;
  if (!model.config().enabled(Toggle::kSs)) effective.use_ss = false;
  return evaluate_scores(videos, scores, effective);
}

void write_score_csvs(EvalReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (VideoScores& vs : report.videos) {
    vs.csv_path = dir / (vs.video_id + ".csv");
    std::ofstream out(vs.csv_path, std::ios::trunc);
    if (!out) throw IoError("cannot create " + vs.csv_path.string());
    out << "frame,score,label\n";
    for (std::size_t f = 0; f < vs.frame_scores.size(); ++f) {
      out << f << ',' << vs.frame_scores[f] << ',' << int{vs.frame_labels[f]} << '\n';
    }
    if (!out) throw IoError("write failed: " + vs.csv_path.string());
  }
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json per_video = nlohmann::json::array();
  for (const VideoScores& vs : videos) {
    nlohmann::json entry = {{"video_id", vs.video_id},
                            {"label", vs.label},
                            {"snippets", vs.snippet_scores.size()},
                            {"frames", vs.frame_scores.size()}};
    if (!vs.csv_path.empty()) entry["csv"] = vs.csv_path.generic_string();
    per_video.push_back(std::move(entry));
  }
  return {{"metrics",
           {{"auc", number_or_null(auc)},
            {"anomaly_auc", number_or_null(anomaly_auc)},
            {"ap", number_or_null(ap)},
            {"far", number_or_null(far)}}},
          {"anomaly_auc_protocol",
           "positives: anomalous frames of abnormal videos; negatives: all frames of normal videos"},
          {"kappa", kappa},
          {"frames", frames},
          {"videos", per_video}};
}

WSVAD_NAMESPACE_END
