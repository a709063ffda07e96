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

#include "wsvad/checkpoint.h"

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "wsvad/errors.h"

WSVAD_NAMESPACE_BEGIN

namespace {

constexpr char kMagic[4] = {'W', 'S', 'C', 'K'};
constexpr std::uint8_t kVersion = 1;

class Writer {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  const std::vector<std::uint8_t>& buffer() const { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<std::uint8_t> data) : data_(std::move(data)) {}

  const std::uint8_t* take(std::size_t n) {
    if (data_.size() - pos_ < n) throw FormatError("checkpoint truncated");
    const std::uint8_t* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint8_t u8() { return *take(1); }
  std::uint16_t u16() {
    const std::uint8_t* p = take(2);
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }
  std::uint32_t u32() {
    const std::uint8_t* p = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
  }
  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::vector<std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path,
                     const nlohmann::json& extra_meta) {
  nlohmann::json meta = extra_meta;
  meta["model"] = model.config().to_json();
  const std::string meta_text = meta.dump();

  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.u8(kVersion);
  w.u32(static_cast<std::uint32_t>(meta_text.size()));
  w.bytes(meta_text.data(), meta_text.size());
  const NamedParams params = model.named_parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u8(static_cast<std::uint8_t>(t.ndim()));
    for (std::size_t d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (Real v : t.data()) w.u32(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(w.buffer().data()),
            static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw IoError("write failed: " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  Reader r(std::vector<std::uint8_t>{std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>()});
  try {
    const std::uint8_t* magic = r.take(4);
    if (!std::equal(magic, magic + 4, kMagic)) throw FormatError("bad magic");
    if (const std::uint8_t v = r.u8(); v != kVersion) {
      throw FormatError("unsupported version " + std::to_string(v));
    }
    const std::uint32_t meta_len = r.u32();
    const auto* meta_bytes = reinterpret_cast<const char*>(r.take(meta_len));
    nlohmann::json meta;
    try {
      meta = nlohmann::json::parse(meta_bytes, meta_bytes + meta_len);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("metadata: ") + e.what());
    }
    if (!meta.contains("model")) throw FormatError("metadata lacks the model config");
    Model model(ModelConfig::from_json(meta["model"]));

    NamedParams values;
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::uint16_t name_len = r.u16();
      const auto* name = reinterpret_cast<const char*>(r.take(name_len));
      Shape shape(r.u8());
      for (auto& d : shape) d = r.u32();
      if (shape_numel(shape) > r.remaining() / 4) throw FormatError("checkpoint truncated");
      std::vector<Real> data(shape_numel(shape));
      for (Real& v : data) v = static_cast<Real>(std::bit_cast<float>(r.u32()));
      values.emplace_back(std::string(name, name_len),
                          Tensor::from_values(std::move(shape), std::move(data)));
    }
    if (!r.done()) throw FormatError("trailing bytes");
    model.load_parameters(values);
    return {std::move(model), std::move(meta)};
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

WSVAD_NAMESPACE_END
