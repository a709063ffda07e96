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

// Precomputed per-snippet feature files, the JSON Lines dataset manifest,
// crop handling, and the synthetic dataset generator.
//
// Feature file layout (little-endian):
//   "WSVF" | version u8 = 1 | dtype u8 = 0 (f32) | ndim u8 = 3 |
//   T u32 | C u32 | D u32 | T*C*D f32 values, row-major
//
// Manifest: one JSON object per line with
//   video_id (string), label (0|1), frame_count (u32, optional),
//   split ("train"|"test"), rgb_i3d, clip (paths), flow_i3d and
//   audio_vggish (paths, optional), anomaly_segments (optional list of
//   [begin, end) frame ranges marking anomalous frames of a label-1 video).
// Relative paths resolve against the manifest's directory.

#ifndef WSVAD_FEATURES_H_
#define WSVAD_FEATURES_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wsvad/config.h"
#include "wsvad/tensor.h"

WSVAD_NAMESPACE_BEGIN

enum class Modality : std::uint8_t { kRgbI3d, kClip, kFlowI3d, kAudioVggish };

inline constexpr std::array<Modality, 4> kAllModalities = {
    Modality::kRgbI3d, Modality::kClip, Modality::kFlowI3d, Modality::kAudioVggish};

// Frames per snippet.
inline constexpr std::size_t kSnippetFrames = 16;

std::string_view modality_name(Modality m);
// Throws ValidationError for unknown names.
Modality parse_modality(std::string_view name);
// Backbone output width: 1024 (I3D), 512 (CLIP), 128 (VGGish).
std::size_t default_dim(Modality m);

// Snippet features of one modality of one video: T x C x D floats.
struct FeatureSequence {
  Modality modality = Modality::kRgbI3d;
  std::size_t steps = 0;
  std::size_t crops = 1;
  std::size_t dims = 0;
  std::vector<float> values;

  float at(std::size_t t, std::size_t c, std::size_t d) const {
    return values[(t * crops + c) * dims + d];
  }
  // The [T x D] matrix of one crop.
  Tensor crop(std::size_t c) const;
};

struct FeatureHeader {
  std::size_t steps = 0;
  std::size_t crops = 0;
  std::size_t dims = 0;
};

std::vector<std::uint8_t> encode_features(const FeatureSequence& seq);
// Throws FormatError on a bad magic/version/dtype/ndim or invalid extents,
// IoError when the buffer is shorter than the header or payload.
FeatureSequence decode_features(std::span<const std::uint8_t> bytes, Modality modality);

void write_features(const FeatureSequence& seq, const std::filesystem::path& path);
FeatureSequence read_features(const std::filesystem::path& path, Modality modality);
// Reads and validates only the fixed-size header.
FeatureHeader read_feature_header(const std::filesystem::path& path);

// T = floor(frames / delta). Throws ValidationError when frames < delta.
std::size_t snippet_count(std::uint64_t frames, std::size_t delta = kSnippetFrames);

enum class CropMode {
  kMean,            // average the crops into one T x 1 x D sequence
  kFlattenAsBatch,  // one T x 1 x D sequence per crop
};

std::vector<FeatureSequence> collapse_crops(const FeatureSequence& seq, CropMode mode);

enum class Split { kTrain, kTest };

struct Segment {
  std::uint64_t begin = 0;  // first anomalous frame
  std::uint64_t end = 0;    // one past the last
};

// A labeled video: one MIL bag of snippets across modalities.
struct VideoBag {
  std::string video_id;
  int label = 0;
  std::optional<std::uint64_t> frame_count;
  Split split = Split::kTrain;
  std::vector<Segment> anomaly_segments;
  std::map<Modality, std::filesystem::path> sources;
  std::map<Modality, FeatureSequence> features;

  bool has(Modality m) const { return features.contains(m) || sources.contains(m); }
  const FeatureSequence& get(Modality m) const;
  // Snippet count of the loaded features.
  std::size_t steps() const;
  // Crop count shared by multi-crop modalities (1 if none).
  std::size_t crops() const;
  // frame_count if known, otherwise steps * 16.
  std::uint64_t frames() const;
  // Per-frame ground truth over frames(): label-0 videos are all 0; label-1
  // videos mark anomaly_segments, or every frame when no segment is given.
  std::vector<std::uint8_t> frame_labels() const;
  // Reads every source file not yet loaded.
  void load();
};

// Parses and validates a manifest. Feature files are not loaded (see
// VideoBag::load) but their headers are checked: consistent T across
// modalities and T = floor(frame_count / 16) when frame_count is given.
std::vector<VideoBag> load_manifest(const std::filesystem::path& path);
// Writes one record per video; sources are written relative to the
// manifest's directory when they live below it.
void write_manifest(const std::filesystem::path& path, const std::vector<VideoBag>& videos);

std::vector<VideoBag> filter_split(const std::vector<VideoBag>& videos, Split split);

struct SynthSpec {
  std::size_t n_normal = 40;
  std::size_t n_abnormal = 40;
  std::size_t n_test_normal = 10;
  std::size_t n_test_abnormal = 10;
  std::size_t min_steps = 8;
  std::size_t max_steps = 24;
  double anomaly_span_fraction = 0.5;
  double mean_shift = 4.0;
  double magnitude_gain = 1.5;
  std::map<Modality, std::size_t> dims = {{Modality::kRgbI3d, 1024},
                                          {Modality::kClip, 512},
                                          {Modality::kFlowI3d, 1024},
                                          {Modality::kAudioVggish, 128}};
  std::size_t crops = 1;
  std::uint64_t seed = 0;
};

struct SynthDataset {
  std::vector<VideoBag> videos;  // features loaded, no sources
  // Per video, per snippet: squared distance to the normal mean summed over
  // modalities (averaged over crops).
  std::vector<std::vector<double>> oracle_scores;
  std::vector<std::vector<std::uint8_t>> snippet_labels;
  // Snippet-level AUC of the oracle scores over all videos.
  double oracle_auc = 0.0;
};

// Normal snippets are i.i.d. N(0, 1) per dim. An abnormal video holds one
// contiguous span (fraction of T) whose snippets are shifted by mean_shift on
// a fixed random 10% of each modality's dims, then scaled by magnitude_gain.
// Deterministic in the seed.
SynthDataset generate_synth(const SynthSpec& spec);

// Writes <dir>/features/<video>.<modality>.wsvf and <dir>/manifest.jsonl,
// updating each video's sources.
void write_dataset(std::vector<VideoBag>& videos, const std::filesystem::path& dir);

WSVAD_NAMESPACE_END

#endif  // WSVAD_FEATURES_H_
