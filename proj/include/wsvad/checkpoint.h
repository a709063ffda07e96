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

// Model checkpoints. Layout (little-endian):
//   "WSCK" | version u8 = 1 | meta length u32 | meta JSON (UTF-8) |
//   tensor count u32 | per tensor: name length u16 | name |
//   ndim u8 | ndim x u32 extents | f32 values, row-major
// The metadata object holds the model config under "model" plus any extra
// fields the caller provides (training config, loss weights, ...).

#ifndef WSVAD_CHECKPOINT_H_
#define WSVAD_CHECKPOINT_H_

#include <filesystem>

#include "json.hpp"
#include "wsvad/config.h"
#include "wsvad/model.h"

WSVAD_NAMESPACE_BEGIN

void save_checkpoint(const Model& model, const std::filesystem::path& path,
                     const nlohmann::json& extra_meta = nlohmann::json::object());

struct LoadedCheckpoint {
  Model model;
  nlohmann::json meta;
};

// Throws IoError if the file cannot be read, FormatError if it is malformed.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

WSVAD_NAMESPACE_END

#endif  // WSVAD_CHECKPOINT_H_
