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

#include "wsvad/features.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <set>

#include "json.hpp"
#include "wsvad/errors.h"
#include "wsvad/metrics.h"
#include "wsvad/rng.h"

WSVAD_NAMESPACE_BEGIN

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {'W', 'S', 'V', 'F'};
constexpr std::uint8_t kVersion = 1;
constexpr std::uint8_t kDtypeF32 = 0;
constexpr std::uint8_t kNdim = 3;
constexpr std::size_t kHeaderBytes = 4 + 3 + 3 * 4;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[pos + i]) << (8 * i);
  return v;
}

FeatureHeader parse_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes) {
    throw IoError("feature file truncated: " + std::to_string(bytes.size()) +
                  " bytes, header needs " + std::to_string(kHeaderBytes));
  }
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw FormatError("feature file: bad magic");
  }
  if (bytes[4] != kVersion) {
    throw FormatError("feature file: unsupported version " + std::to_string(bytes[4]));
  }
  if (bytes[5] != kDtypeF32) {
    throw FormatError("feature file: unsupported dtype " + std::to_string(bytes[5]));
  }
  if (bytes[6] != kNdim) {
    throw FormatError("feature file: expected 3 dims, got " + std::to_string(bytes[6]));
  }
  FeatureHeader h{get_u32(bytes, 7), get_u32(bytes, 11), get_u32(bytes, 15)};
  if (h.steps == 0) throw FormatError("feature file: T = 0");
  if (h.crops != 1 && h.crops != 5) {
    throw FormatError("feature file: crop count must be 1 or 5, got " +
                      std::to_string(h.crops));
  }
  if (h.dims == 0) throw FormatError("feature file: D = 0");
  return h;
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string_view split_name(Split s) { return s == Split::kTrain ? "train" : "test"; }

Split parse_split(const std::string& s, const std::string& video_id) {
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  throw ValidationError(video_id + ": split must be \"train\" or \"test\", got \"" + s + "\"");
}

}  // namespace

std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::kRgbI3d: return "rgb_i3d";
    case Modality::kClip: return "clip";
    case Modality::kFlowI3d: return "flow_i3d";
    case Modality::kAudioVggish: return "audio_vggish";
  }
  return "unknown";
}

Modality parse_modality(std::string_view name) {
  for (Modality m : kAllModalities) {
    if (modality_name(m) == name) return m;
  }
  throw ValidationError("unknown modality \"" + std::string(name) + "\"");
}

std::size_t default_dim(Modality m) {
  switch (m) {
    case Modality::kRgbI3d:
    case Modality::kFlowI3d: return 1024;
    case Modality::kClip: return 512;
    case Modality::kAudioVggish: return 128;
  }
  return 0;
}

Tensor FeatureSequence::crop(std::size_t c) const {
  if (c >= crops) {
    throw ContractError("crop " + std::to_string(c) + " of " + std::to_string(crops));
  }
  std::vector<Real> out(steps * dims);
  for (std::size_t t = 0; t < steps; ++t) {
    const float* src = values.data() + (t * crops + c) * dims;
    std::copy(src, src + dims, out.begin() + static_cast<std::ptrdiff_t>(t * dims));
  }
  return Tensor::from_values({steps, dims}, std::move(out));
}

std::vector<std::uint8_t> encode_features(const FeatureSequence& seq) {
  if (seq.values.size() != seq.steps * seq.crops * seq.dims) {
    throw ContractError("encode_features: value count does not match T x C x D");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + 4 * seq.values.size());
  for (std::uint8_t b : kMagic) out.push_back(b);
  out.push_back(kVersion);
  out.push_back(kDtypeF32);
  out.push_back(kNdim);
  put_u32(out, static_cast<std::uint32_t>(seq.steps));
  put_u32(out, static_cast<std::uint32_t>(seq.crops));
  put_u32(out, static_cast<std::uint32_t>(seq.dims));
  for (float v : seq.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

FeatureSequence decode_features(std::span<const std::uint8_t> bytes, Modality modality) {
  const FeatureHeader h = parse_header(bytes);
  // Extents are u32 each, so the product can overflow 64 bits.
  const auto wide = static_cast<unsigned __int128>(h.steps) * h.crops * h.dims;
  if (wide * 4 > bytes.size()) {
    throw IoError("feature file truncated: " + std::to_string(bytes.size()) + " bytes for " +
                  std::to_string(h.steps) + " x " + std::to_string(h.crops) + " x " +
                  std::to_string(h.dims) + " floats");
  }
  const auto count = static_cast<std::size_t>(wide);
  const std::size_t expected = kHeaderBytes + 4 * count;
  if (bytes.size() < expected) {
    throw IoError("feature file truncated: " + std::to_string(bytes.size()) + " of " +
                  std::to_string(expected) + " bytes");
  }
  if (bytes.size() > expected) {
    throw FormatError("feature file: " + std::to_string(bytes.size() - expected) +
                      " trailing bytes");
  }
  FeatureSequence seq{modality, h.steps, h.crops, h.dims, std::vector<float>(count)};
  for (std::size_t i = 0; i < count; ++i) {
    seq.values[i] = std::bit_cast<float>(get_u32(bytes, kHeaderBytes + 4 * i));
  }
  return seq;
}

void write_features(const FeatureSequence& seq, const fs::path& path) {
  const std::vector<std::uint8_t> bytes = encode_features(seq);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

FeatureSequence read_features(const fs::path& path, Modality modality) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  try {
    return decode_features(bytes, modality);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

FeatureHeader read_feature_header(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::array<std::uint8_t, kHeaderBytes> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), buf.size());
  const auto got = static_cast<std::size_t>(in.gcount());
  try {
    return parse_header(std::span<const std::uint8_t>(buf.data(), got));
  } catch (const Error& e) {
    if (dynamic_cast<const FormatError*>(&e)) throw FormatError(path.string() + ": " + e.what());
    throw IoError(path.string() + ": " + e.what());
  }
}

std::size_t snippet_count(std::uint64_t frames, std::size_t delta) {
  if (delta == 0) throw ParameterError("snippet length must be positive");
  if (frames < delta) {
    throw ValidationError("video has " + std::to_string(frames) +
                          " frames, fewer than one snippet of " + std::to_string(delta));
  }
  return static_cast<std::size_t>(frames / delta);
}

std::vector<FeatureSequence> collapse_crops(const FeatureSequence& seq, CropMode mode) {
  std::vector<FeatureSequence> out;
  if (mode == CropMode::kMean) {
    FeatureSequence mean{seq.modality, seq.steps, 1, seq.dims,
                         std::vector<float>(seq.steps * seq.dims, 0.0f)};
    for (std::size_t t = 0; t < seq.steps; ++t) {
      for (std::size_t d = 0; d < seq.dims; ++d) {
        double acc = 0.0;
        for (std::size_t c = 0; c < seq.crops; ++c) acc += seq.at(t, c, d);
        mean.values[t * seq.dims + d] = static_cast<float>(acc / static_cast<double>(seq.crops));
      }
    }
    out.push_back(std::move(mean));
    return out;
  }
  for (std::size_t c = 0; c < seq.crops; ++c) {
    FeatureSequence one{seq.modality, seq.steps, 1, seq.dims, {}};
    one.values.reserve(seq.steps * seq.dims);
    for (std::size_t t = 0; t < seq.steps; ++t) {
      const auto* src = seq.values.data() + (t * seq.crops + c) * seq.dims;
      one.values.insert(one.values.end(), src, src + seq.dims);
    }
    out.push_back(std::move(one));
  }
  return out;
}

const FeatureSequence& VideoBag::get(Modality m) const {
  auto it = features.find(m);
  if (it == features.end()) {
    throw ContractError(video_id + ": " + std::string(modality_name(m)) + " features not loaded");
  }
  return it->second;
}

std::size_t VideoBag::steps() const {
  if (features.empty()) throw ContractError(video_id + ": no features loaded");
  return features.begin()->second.steps;
}

std::size_t VideoBag::crops() const {
  std::size_t c = 1;
  for (const auto& [m, seq] : features) c = std::max(c, seq.crops);
  return c;
}

std::uint64_t VideoBag::frames() const {
  return frame_count ? *frame_count : static_cast<std::uint64_t>(steps()) * kSnippetFrames;
}

std::vector<std::uint8_t> VideoBag::frame_labels() const {
  const std::uint64_t n = frames();
  std::vector<std::uint8_t> labels(n, 0);
  if (label == 0) return labels;
  if (anomaly_segments.empty()) {
    std::fill(labels.begin(), labels.end(), 1);
    return labels;
  }
  for (const Segment& s : anomaly_segments) {
    for (std::uint64_t f = s.begin; f < std::min(s.end, n); ++f) labels[f] = 1;
  }
  return labels;
}

void VideoBag::load() {
  for (const auto& [m, path] : sources) {
    if (!features.contains(m)) features.emplace(m, read_features(path, m));
  }
  std::size_t t = 0;
  for (const auto& [m, seq] : features) {
    if (t != 0 && seq.steps != t) {
      throw ValidationError(video_id + ": modalities disagree on T");
    }
    t = seq.steps;
  }
}

std::vector<VideoBag> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  std::vector<VideoBag> videos;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(where + ": " + e.what());
    }
    if (!rec.is_object()) throw ValidationError(where + ": record is not an object");
    if (!rec.contains("video_id") || !rec["video_id"].is_string()) {
      throw ValidationError(where + ": missing string field video_id");
    }
    VideoBag v;
    v.video_id = rec["video_id"].get<std::string>();
    if (!seen.insert(v.video_id).second) {
      throw ValidationError(v.video_id + ": duplicate video_id");
    }
    if (!rec.contains("label") || !rec["label"].is_number_integer()) {
      throw ValidationError(v.video_id + ": missing integer field label");
    }
    const auto label = rec["label"].get<std::int64_t>();
    if (label != 0 && label != 1) {
      throw ValidationError(v.video_id + ": label must be 0 or 1, got " + std::to_string(label));
    }
    v.label = static_cast<int>(label);
    if (!rec.contains("split") || !rec["split"].is_string()) {
      throw ValidationError(v.video_id + ": missing string field split");
    }
    v.split = parse_split(rec["split"].get<std::string>(), v.video_id);
    if (rec.contains("frame_count") && !rec["frame_count"].is_null()) {
      if (!rec["frame_count"].is_number_unsigned()) {
        throw ValidationError(v.video_id + ": frame_count must be a non-negative integer");
      }
      v.frame_count = rec["frame_count"].get<std::uint64_t>();
    }
    if (rec.contains("anomaly_segments")) {
      for (const json& seg : rec["anomaly_segments"]) {
        if (!seg.is_array() || seg.size() != 2 || !seg[0].is_number_unsigned() ||
            !seg[1].is_number_unsigned() || seg[0].get<std::uint64_t>() > seg[1].get<std::uint64_t>()) {
          throw ValidationError(v.video_id + ": anomaly_segments entries must be [begin, end)");
        }
        v.anomaly_segments.push_back({seg[0].get<std::uint64_t>(), seg[1].get<std::uint64_t>()});
      }
    }
    for (Modality m : kAllModalities) {
      const std::string key(modality_name(m));
      if (!rec.contains(key) || rec[key].is_null()) {
        if (m == Modality::kRgbI3d || m == Modality::kClip) {
          throw ValidationError(v.video_id + ": missing feature path " + key);
        }
        continue;
      }
      if (!rec[key].is_string()) throw ValidationError(v.video_id + ": " + key + " must be a path");
      fs::path p = rec[key].get<std::string>();
      if (p.is_relative()) p = base / p;
      if (!fs::exists(p)) {
        throw ValidationError(v.video_id + ": " + key + " file not found: " + p.string());
      }
      v.sources.emplace(m, p);
    }

    std::size_t steps = 0;
    for (const auto& [m, p] : v.sources) {
      const FeatureHeader h = read_feature_header(p);
      if (steps != 0 && h.steps != steps) {
        throw ValidationError(v.video_id + ": " + std::string(modality_name(m)) + " has T = " +
                              std::to_string(h.steps) + ", other modalities have T = " +
                              std::to_string(steps));
      }
      steps = h.steps;
    }
    if (v.frame_count) {
      const std::size_t expected = snippet_count(*v.frame_count);
      if (expected != steps) {
        throw ValidationError(v.video_id + ": frame_count " + std::to_string(*v.frame_count) +
                              " implies T = " + std::to_string(expected) +
                              " but features have T = " + std::to_string(steps));
      }
    }
    videos.push_back(std::move(v));
  }
  return videos;
}

void write_manifest(const fs::path& path, const std::vector<VideoBag>& videos) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot create manifest " + path.string());
  const fs::path base = fs::absolute(path).parent_path();
  for (const VideoBag& v : videos) {
    json rec;
    rec["video_id"] = v.video_id;
    rec["label"] = v.label;
    if (v.frame_count) rec["frame_count"] = *v.frame_count;
    rec["split"] = split_name(v.split);
    for (const auto& [m, p] : v.sources) {
      const fs::path abs = fs::absolute(p);
      const fs::path rel = abs.lexically_relative(base);
      const bool below = !rel.empty() && *rel.begin() != "..";
      rec[std::string(modality_name(m))] = (below ? rel : abs).generic_string();
    }
    if (!v.anomaly_segments.empty()) {
      json segs = json::array();
      for (const Segment& s : v.anomaly_segments) segs.push_back({s.begin, s.end});
      rec["anomaly_segments"] = std::move(segs);
    }
    out << rec.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<VideoBag> filter_split(const std::vector<VideoBag>& videos, Split split) {
  std::vector<VideoBag> out;
  std::copy_if(videos.begin(), videos.end(), std::back_inserter(out),
               [split](const VideoBag& v) { return v.split == split; });
  return out;
}

SynthDataset generate_synth(const SynthSpec& spec) {
  if (spec.min_steps == 0 || spec.min_steps > spec.max_steps) {
    throw ParameterError("synth: need 0 < min_steps <= max_steps");
  }
  if (spec.anomaly_span_fraction <= 0.0 || spec.anomaly_span_fraction > 1.0) {
    throw ParameterError("synth: anomaly_span_fraction must be in (0, 1]");
  }
  if (spec.crops != 1 && spec.crops != 5) throw ParameterError("synth: crops must be 1 or 5");
  if (!spec.dims.contains(Modality::kRgbI3d) || !spec.dims.contains(Modality::kClip)) {
    throw ParameterError("synth: rgb_i3d and clip dims are required");
  }

  Rng rng(spec.seed);
  // Anomalous subspace per modality: a fixed 10% of the dims.
  std::map<Modality, std::vector<std::uint8_t>> subspace;
  for (const auto& [m, dims] : spec.dims) {
    std::vector<std::size_t> idx(dims);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    rng.shuffle(idx);
    const std::size_t n = std::max<std::size_t>(1, (dims + 9) / 10);
    std::vector<std::uint8_t> mask(dims, 0);
    for (std::size_t i = 0; i < n; ++i) mask[idx[i]] = 1;
    subspace.emplace(m, std::move(mask));
  }

  struct Group {
    std::size_t count;
    int label;
    Split split;
    const char* tag;
  };
  const Group groups[] = {{spec.n_normal, 0, Split::kTrain, "train_normal"},
                          {spec.n_abnormal, 1, Split::kTrain, "train_abnormal"},
                          {spec.n_test_normal, 0, Split::kTest, "test_normal"},
                          {spec.n_test_abnormal, 1, Split::kTest, "test_abnormal"}};

  SynthDataset ds;
  for (const Group& g : groups) {
    for (std::size_t i = 0; i < g.count; ++i) {
      VideoBag v;
      v.video_id = std::string(g.tag) + "_" + std::to_string(i);
      v.label = g.label;
      v.split = g.split;
      const std::size_t steps = spec.min_steps + rng.below(spec.max_steps - spec.min_steps + 1);
      v.frame_count = static_cast<std::uint64_t>(steps) * kSnippetFrames;

      std::vector<std::uint8_t> snippet_labels(steps, 0);
      if (g.label == 1) {
        const auto span = std::clamp<std::size_t>(
            static_cast<std::size_t>(std::lround(spec.anomaly_span_fraction * static_cast<double>(steps))),
            1, steps);
        const std::size_t start = rng.below(steps - span + 1);
        std::fill_n(snippet_labels.begin() + static_cast<std::ptrdiff_t>(start), span, 1);
        v.anomaly_segments.push_back({start * kSnippetFrames, (start + span) * kSnippetFrames});
      }

      std::vector<double> oracle(steps, 0.0);
      for (const auto& [m, dims] : spec.dims) {
        const auto& mask = subspace.at(m);
        FeatureSequence seq{m, steps, spec.crops, dims,
                            std::vector<float>(steps * spec.crops * dims)};
        for (std::size_t t = 0; t < steps; ++t) {
          const bool anomalous = snippet_labels[t] != 0;
          double energy = 0.0;
          for (std::size_t c = 0; c < spec.crops; ++c) {
            for (std::size_t d = 0; d < dims; ++d) {
              double x = rng.normal();
              if (anomalous) {
                if (mask[d]) x += spec.mean_shift;
                x *= spec.magnitude_gain;
              }
              seq.values[(t * spec.crops + c) * dims + d] = static_cast<float>(x);
              energy += x * x;
            }
          }
          oracle[t] += energy / static_cast<double>(spec.crops);
        }
        v.features.emplace(m, std::move(seq));
      }
      ds.videos.push_back(std::move(v));
      ds.oracle_scores.push_back(std::move(oracle));
      ds.snippet_labels.push_back(std::move(snippet_labels));
    }
  }

  std::vector<double> all_scores;
  std::vector<std::uint8_t> all_labels;
  for (std::size_t i = 0; i < ds.videos.size(); ++i) {
    all_scores.insert(all_scores.end(), ds.oracle_scores[i].begin(), ds.oracle_scores[i].end());
    all_labels.insert(all_labels.end(), ds.snippet_labels[i].begin(), ds.snippet_labels[i].end());
  }
  try {
    ds.oracle_auc = roc_auc(all_scores, all_labels);
  } catch (const UndefinedMetricError&) {
    ds.oracle_auc = std::numeric_limits<double>::quiet_NaN();
  }
  return ds;
}

void write_dataset(std::vector<VideoBag>& videos, const fs::path& dir) {
  const fs::path feature_dir = dir / "features";
  std::error_code ec;
  fs::create_directories(feature_dir, ec);
  if (ec) throw IoError("cannot create " + feature_dir.string() + ": " + ec.message());
  for (VideoBag& v : videos) {
    for (const auto& [m, seq] : v.features) {
      const fs::path p =
          feature_dir / (v.video_id + "." + std::string(modality_name(m)) + ".wsvf");
      write_features(seq, p);
      v.sources[m] = p;
    }
  }
  write_manifest(dir / "manifest.jsonl", videos);
}

WSVAD_NAMESPACE_END
