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

// wsvad: synth | train | evaluate | score | gradcheck | ablate

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "wsvad/ablate.h"
#include "wsvad/checkpoint.h"
#include "wsvad/errors.h"
#include "wsvad/evaluate.h"
#include "wsvad/features.h"
#include "wsvad/gradcheck.h"
#include "wsvad/train.h"

#ifndef WSVAD_BUILD_ID
#define WSVAD_BUILD_ID "unknown"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw wsvad::IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<wsvad::VideoBag> load_split(const fs::path& manifest, const std::string& split) {
  auto videos = wsvad::load_manifest(manifest);
  if (split == "train") videos = wsvad::filter_split(videos, wsvad::Split::kTrain);
  if (split == "test") videos = wsvad::filter_split(videos, wsvad::Split::kTest);
  for (auto& v : videos) v.load();
  return videos;
}

struct ModelFlags {
  std::size_t hidden_dim = wsvad::ModelConfig{}.hidden_dim;
  std::size_t heads = wsvad::ModelConfig{}.heads;
  std::size_t memory_slots = wsvad::ModelConfig{}.memory_slots;
  std::size_t causal_kernel = wsvad::ModelConfig{}.causal_kernel;
  double dropout = wsvad::ModelConfig{}.dropout;
  std::string disable;

  void add(CLI::App* cmd) {
    cmd->add_option("--hidden-dim", hidden_dim, "Per-stream feature width D_h")->capture_default_str();
    cmd->add_option("--heads", heads, "Attention heads")->capture_default_str();
    cmd->add_option("--memory-slots", memory_slots, "Slots per memory bank")->capture_default_str();
    cmd->add_option("--causal-kernel", causal_kernel, "Classifier kernel")->capture_default_str();
    cmd->add_option("--dropout", dropout, "Dropout rate")->capture_default_str();
    cmd->add_option("--disable", disable,
                    "Comma list of blocks to switch off: i3d,tca,clip,topk,mhsa,dmu,pel,mc,ss");
  }
  wsvad::ModelConfig config(const wsvad::VideoBag& sample, std::uint64_t seed) const {
    wsvad::ModelConfig cfg = wsvad::with_input_dims(wsvad::ModelConfig{}, sample);
    cfg.hidden_dim = hidden_dim;
    cfg.heads = heads;
    cfg.memory_slots = memory_slots;
    cfg.causal_kernel = causal_kernel;
    cfg.dropout = dropout;
    cfg.disabled = wsvad::parse_toggles(disable);
    cfg.seed = seed;
    cfg.validate();
    return cfg;
  }
};

struct TrainFlags {
  wsvad::TrainConfig train;
  wsvad::LossWeights weights;
  double lr = 0.0;

  void add(CLI::App* cmd) {
    cmd->add_option("--epochs", train.epochs)->capture_default_str();
    cmd->add_option("--batch", train.batch, "Even; half normal, half abnormal")->capture_default_str();
    cmd->add_option("--lr", lr, "One learning rate for every group (overrides the three below)");
    cmd->add_option("--lr-rgb", train.lr_rgb)->capture_default_str();
    cmd->add_option("--lr-flow", train.lr_flow)->capture_default_str();
    cmd->add_option("--lr-audio", train.lr_audio)->capture_default_str();
    cmd->add_option("--seed", train.seed)->capture_default_str();
    cmd->add_option("--lambda-kd", weights.kd)->capture_default_str();
    cmd->add_option("--lambda-mc", weights.mc)->capture_default_str();
    cmd->add_option("--lambda-dm", weights.dm)->capture_default_str();
    cmd->add_option("--lambda-kl", weights.kl)->capture_default_str();
    cmd->add_option("--mc-margin", weights.mc_margin)->capture_default_str();
    cmd->add_option("--kappa", train.eval.kappa, "Smoothing window for evaluation")
        ->capture_default_str();
    cmd->add_flag("!--no-ss", train.eval.use_ss, "Evaluate without score smoothing");
  }
  void finalize() {
    if (lr > 0) train.lr_rgb = train.lr_flow = train.lr_audio = lr;
  }
};

int run_synth(const fs::path& out, wsvad::SynthSpec spec) {
  wsvad::SynthDataset ds = wsvad::generate_synth(spec);
  wsvad::write_dataset(ds.videos, out);
  std::printf("wrote %zu videos to %s (oracle snippet AUC %.4f)\n", ds.videos.size(),
              (out / "manifest.jsonl").c_str(), ds.oracle_auc);
  return 0;
}

int run_train(const fs::path& manifest, const fs::path& out, const fs::path& log_path,
              const fs::path& teacher_path, bool eval_each_epoch, const ModelFlags& mf,
              TrainFlags tf) {
  tf.finalize();
  const auto train_videos = load_split(manifest, "train");
  if (train_videos.empty()) throw wsvad::ValidationError(manifest.string() + ": no train videos");
  std::vector<wsvad::VideoBag> eval_videos;
  if (eval_each_epoch) eval_videos = load_split(manifest, "test");
  const wsvad::ModelConfig cfg = mf.config(train_videos.front(), tf.train.seed);

  std::optional<wsvad::LoadedCheckpoint> teacher;
  if (!teacher_path.empty()) teacher.emplace(wsvad::load_checkpoint(teacher_path));
  if (teacher && tf.weights.kd == 0) spdlog::warn("--teacher given with --lambda-kd 0");

  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path, std::ios::trunc);
    if (!log) throw wsvad::IoError("cannot write " + log_path.string());
  }
  const wsvad::TrainResult result =
      wsvad::train(train_videos, eval_videos, cfg, tf.train, tf.weights,
                   teacher ? &teacher->model : nullptr);
  if (log) {
    for (const auto& s : result.steps) log << s.to_json().dump() << '\n';
    for (const auto& e : result.epochs) log << e.to_json().dump() << '\n';
  }
  json meta = {{"train", tf.train.to_json()},
               {"loss_weights", tf.weights.to_json()},
               {"build", WSVAD_BUILD_ID}};
  wsvad::save_checkpoint(result.model, out, meta);
  std::printf("saved %s after %zu steps\n", out.c_str(), result.steps.size());
  return 0;
}

int run_evaluate(const fs::path& ckpt, const fs::path& manifest, const std::string& split,
                 const wsvad::EvalOptions& opts, const fs::path& report_path,
                 const fs::path& csv_dir) {
  const wsvad::LoadedCheckpoint loaded = wsvad::load_checkpoint(ckpt);
  const auto videos = load_split(manifest, split);
  wsvad::EvalReport report = wsvad::evaluate(loaded.model, videos, opts);
  if (!csv_dir.empty()) wsvad::write_score_csvs(report, csv_dir);
  json j = report.to_json();
  j["checkpoint"] = ckpt.string();
  j["manifest"] = manifest.string();
  j["build"] = WSVAD_BUILD_ID;
  if (!report_path.empty()) write_json(report_path, j);
  std::printf("AUC %.4f  AP %.4f  FAR %.4f  (kappa %zu, %zu frames)\n", report.auc, report.ap,
              report.far, report.kappa, report.frames);
  return 0;
}

// Accepts "modality=path" or a path named <video>.<modality>.wsvf.
std::pair<wsvad::Modality, fs::path> feature_arg(const std::string& arg) {
  if (auto eq = arg.find('='); eq != std::string::npos) {
    return {wsvad::parse_modality(arg.substr(0, eq)), arg.substr(eq + 1)};
  }
  const fs::path p(arg);
  const std::string ext = p.stem().extension().string();  // ".<modality>"
  return {wsvad::parse_modality(ext.empty() ? ext : ext.substr(1)), p};
}

int run_score(const fs::path& ckpt, const std::vector<std::string>& features,
              const wsvad::EvalOptions& opts, const fs::path& out_path) {
  const wsvad::LoadedCheckpoint loaded = wsvad::load_checkpoint(ckpt);
  wsvad::VideoBag video;
  video.video_id = "input";
  for (const std::string& arg : features) {
    const auto [m, path] = feature_arg(arg);
    video.features[m] = wsvad::read_features(path, m);
  }
  auto scores = wsvad::score_video(loaded.model, video);
  const bool smooth = opts.use_ss && loaded.model.config().enabled(wsvad::Toggle::kSs);
  if (smooth) scores = wsvad::smooth_scores(scores, opts.kappa);
  const auto frames = wsvad::expand_to_frames(scores, video.frames());

  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::trunc);
    if (!file) throw wsvad::IoError("cannot write " + out_path.string());
  }
  std::ostream& out = out_path.empty() ? std::cout : file;
  out << "frame,score\n";
  for (std::size_t f = 0; f < frames.size(); ++f) out << f << ',' << frames[f] << '\n';
  return 0;
}

int run_gradcheck(const wsvad::gradcheck::SuiteOptions& opts) {
  const auto results = wsvad::gradcheck::run_suite(opts);
  std::size_t failed = 0;
  double seconds = 0.0;
  for (const auto& r : results) {
    std::printf("%-5s %-22s max rel err %.3e (%s) %5.2fs %s\n", r.group.c_str(), r.name.c_str(),
                r.max_error, r.worst_input.c_str(), r.seconds, r.passed ? "ok" : "FAIL");
    failed += r.passed ? 0 : 1;
    seconds += r.seconds;
  }
  std::printf("%zu cases, %zu failed, %zu seeds each, %.1fs\n", results.size(), failed,
              opts.seeds, seconds);
  if (results.empty()) throw wsvad::ParameterError("no gradient case matches the filter");
  return failed == 0 ? 0 : 1;
}

int run_ablate(const fs::path& manifest, std::uint64_t synth_seed, const std::string& grid_arg,
               const ModelFlags& mf, TrainFlags tf, const fs::path& out_md,
               const fs::path& out_json) {
  tf.finalize();
  std::vector<wsvad::VideoBag> train_videos, test_videos;
  if (manifest.empty()) {
    wsvad::SynthSpec spec;
    spec.seed = synth_seed;
    const auto ds = wsvad::generate_synth(spec);
    train_videos = wsvad::filter_split(ds.videos, wsvad::Split::kTrain);
    test_videos = wsvad::filter_split(ds.videos, wsvad::Split::kTest);
  } else {
    train_videos = load_split(manifest, "train");
    test_videos = load_split(manifest, "test");
  }
  if (train_videos.empty() || test_videos.empty()) {
    throw wsvad::ValidationError("ablate needs both train and test videos");
  }
  std::vector<wsvad::Toggle> grid;
  for (wsvad::Toggle t : wsvad::parse_toggles(grid_arg)) grid.push_back(t);
  const wsvad::ModelConfig cfg = mf.config(train_videos.front(), tf.train.seed);
  const auto rows = wsvad::run_ablation(train_videos, test_videos, cfg, tf.train, tf.weights, grid);
  const std::string table = wsvad::ablation_markdown(rows, grid);
  std::cout << table;
  if (!out_md.empty()) {
    std::ofstream out(out_md, std::ios::trunc);
    if (!out) throw wsvad::IoError("cannot write " + out_md.string());
    out << table;
  }
  if (!out_json.empty()) {
    json j = json::array();
    for (const auto& row : rows) {
      j.push_back({{"disabled", row.disabled ? std::string(wsvad::toggle_name(*row.disabled))
                                             : std::string()},
                   {"report", row.report.to_json()["metrics"]}});
    }
    write_json(out_json, j);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly supervised video anomaly detection on precomputed snippet features"};
  app.set_version_flag("--version", std::string("wsvad ") + WSVAD_BUILD_ID);
  app.require_subcommand(1);
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset with known anomalies");
  fs::path synth_out;
  wsvad::SynthSpec spec;
  spec.seed = 7;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", spec.seed)->capture_default_str();
  synth->add_option("--normals,--n-normal", spec.n_normal)->capture_default_str();
  synth->add_option("--abnormals,--n-abnormal", spec.n_abnormal)->capture_default_str();
  synth->add_option("--n-test-normal", spec.n_test_normal)->capture_default_str();
  synth->add_option("--n-test-abnormal", spec.n_test_abnormal)->capture_default_str();
  synth->add_option("--min-steps", spec.min_steps)->capture_default_str();
  synth->add_option("--max-steps", spec.max_steps)->capture_default_str();
  synth->add_option("--mean-shift", spec.mean_shift)->capture_default_str();
  synth->add_option("--gain", spec.magnitude_gain)->capture_default_str();
  synth->add_option("--span", spec.anomaly_span_fraction, "Anomalous fraction of a video")
      ->capture_default_str();
  synth->add_option("--crops", spec.crops, "1 or 5")->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Train a model on the train split of a manifest");
  fs::path train_manifest, train_out, train_log, teacher;
  bool eval_each_epoch = false;
  ModelFlags train_model;
  TrainFlags train_flags;
  train->add_option("--manifest", train_manifest)->required()->check(CLI::ExistingFile);
  train->add_option("--out", train_out, "Checkpoint path")->required();
  train->add_option("--log", train_log, "JSON Lines loss log");
  train->add_option("--teacher", teacher, "Frozen checkpoint for the distillation term")
      ->check(CLI::ExistingFile);
  train->add_flag("--eval", eval_each_epoch, "Evaluate the test split after every epoch");
  train_model.add(train);
  train_flags.add(train);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Frame-level AUC / AP / FAR of a checkpoint");
  fs::path eval_ckpt, eval_manifest, eval_report, eval_csv;
  std::string eval_split = "test";
  wsvad::EvalOptions eval_opts;
  evaluate->add_option("--ckpt", eval_ckpt)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--manifest", eval_manifest)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--split", eval_split)
      ->check(CLI::IsMember({"train", "test", "all"}))
      ->capture_default_str();
  evaluate->add_option("--kappa", eval_opts.kappa)->capture_default_str();
  evaluate->add_flag("!--no-ss", eval_opts.use_ss, "Skip score smoothing");
  evaluate->add_option("--far-threshold", eval_opts.far_threshold)->capture_default_str();
  evaluate->add_option("--report", eval_report, "JSON report path");
  evaluate->add_option("--csv-dir", eval_csv, "Per-video frame score CSVs");

  // score
  auto* score = app.add_subcommand("score", "Per-frame scores of one video as CSV");
  fs::path score_ckpt, score_out;
  std::vector<std::string> score_features;
  wsvad::EvalOptions score_opts;
  score->add_option("--ckpt", score_ckpt)->required()->check(CLI::ExistingFile);
  score->add_option("--features", score_features,
                    "Feature files, as modality=path or <video>.<modality>.wsvf")
      ->required();
  score->add_option("--kappa", score_opts.kappa)->capture_default_str();
  score->add_flag("!--no-ss", score_opts.use_ss, "Skip score smoothing");
  score->add_option("--out", score_out, "CSV path (default: stdout)");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  wsvad::gradcheck::SuiteOptions gc;
  gradcheck->add_option("--seed", gc.seed, "First seed")->capture_default_str();
  gradcheck->add_option("--seeds", gc.seeds, "Seeds per case")->capture_default_str();
  gradcheck->add_option("--tolerance", gc.tolerance)->capture_default_str();
  gradcheck->add_option("--filter", gc.filter, "Only cases whose name contains this");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Retrain with one block disabled at a time");
  fs::path ablate_manifest, ablate_md, ablate_json;
  std::uint64_t ablate_synth_seed = 7;
  std::string grid = "tca,topk,mhsa,dmu,mc,ss";
  ModelFlags ablate_model;
  TrainFlags ablate_flags;
  ablate->add_option("--grid", grid, "Blocks to disable one at a time")->capture_default_str();
  ablate->add_option("--manifest", ablate_manifest, "Dataset (default: synthetic)")
      ->check(CLI::ExistingFile);
  ablate->add_option("--synth-seed", ablate_synth_seed)->capture_default_str();
  ablate->add_option("--out", ablate_md, "Markdown table path");
  ablate->add_option("--json", ablate_json, "Metrics per row as JSON");
  ablate_model.add(ablate);
  ablate_flags.add(ablate);

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug
                    : quiet ? spdlog::level::warn
                            : spdlog::level::info);

  try {
    if (*synth) return run_synth(synth_out, spec);
    if (*train) {
      return run_train(train_manifest, train_out, train_log, teacher, eval_each_epoch,
                       train_model, train_flags);
    }
    if (*evaluate) {
      return run_evaluate(eval_ckpt, eval_manifest, eval_split, eval_opts, eval_report, eval_csv);
    }
    if (*score) return run_score(score_ckpt, score_features, score_opts, score_out);
    if (*gradcheck) return run_gradcheck(gc);
    if (*ablate) {
      return run_ablate(ablate_manifest, ablate_synth_seed, grid, ablate_model, ablate_flags,
                        ablate_md, ablate_json);
    }
  } catch (const wsvad::Error& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("unexpected: {}", e.what());
    return 3;
  }
  return 0;
}
