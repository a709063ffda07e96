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

// Score post-processing and frame-level evaluation.

#ifndef WSVAD_EVALUATE_H_
#define WSVAD_EVALUATE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "wsvad/config.h"
#include "wsvad/features.h"
#include "wsvad/model.h"

WSVAD_NAMESPACE_BEGIN

// Forward moving average: out[i] = mean(s[i .. min(i + kappa, T) - 1]).
// Throws ParameterError for kappa = 0.
std::vector<double> smooth_scores(std::span<const double> scores, std::size_t kappa);

// Repeats each snippet score `delta` times. Frames past T * delta take the
// last score; when n_frames < T * delta the tail is cut (and logged).
// Throws ContractError when n_frames < T * delta - delta + 1.
std::vector<double> expand_to_frames(std::span<const double> scores, std::uint64_t n_frames,
                                     std::size_t delta = kSnippetFrames);

// Eval-mode snippet scores of a loaded video, averaged over its crops.
std::vector<double> score_video(const Model& model, const VideoBag& video);

struct EvalOptions {
  std::size_t kappa = 9;
  bool use_ss = true;
  double far_threshold = 0.5;
};

struct VideoScores {
  std::string video_id;
  int label = 0;
  std::vector<double> snippet_scores;  // before smoothing
  std::vector<double> frame_scores;    // after smoothing and expansion
  std::vector<std::uint8_t> frame_labels;
  std::filesystem::path csv_path;
};

// Metrics over frames pooled from every video. `auc` ranks all frames
// against their frame labels. `anomaly_auc` keeps only the anomalous frames
// of abnormal videos as positives and the frames of normal videos as
// negatives. Metrics that are undefined for the input are NaN.
struct EvalReport {
  double auc = 0.0;
  double anomaly_auc = 0.0;
  double ap = 0.0;
  double far = 0.0;
  std::size_t kappa = 1;  // effective window, 1 without smoothing
  std::size_t frames = 0;
  std::vector<VideoScores> videos;

  nlohmann::json to_json() const;
};

// Evaluates given snippet scores, one series per video.
EvalReport evaluate_scores(const std::vector<VideoBag>& videos,
                           const std::vector<std::vector<double>>& snippet_scores,
                           const EvalOptions& opts);

// Scores every video with the model, then evaluate_scores. Smoothing is
// skipped when the model disables the SS toggle. Throws ContractError when
// `videos` is empty.
EvalReport evaluate(const Model& model, const std::vector<VideoBag>& videos,
                    const EvalOptions& opts);

// Writes <dir>/<video_id>.csv (frame,score,label) per video and records the
// paths in the report.
void write_score_csvs(EvalReport& report, const std::filesystem::path& dir);

WSVAD_NAMESPACE_END

#endif  // WSVAD_EVALUATE_H_
