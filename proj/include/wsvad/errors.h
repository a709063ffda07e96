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

#ifndef WSVAD_ERRORS_H_
#define WSVAD_ERRORS_H_

#include <stdexcept>
#include <string>

#include "wsvad/config.h"

WSVAD_NAMESPACE_BEGIN

// Root of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor extents do not satisfy an operation's shape contract.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A caller violated a precondition (non-scalar loss, k > T, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// A numeric hyperparameter is outside its documented domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Inconsistent model configuration (e.g. width not divisible by heads).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A file was readable but its contents are not in the expected format.
class FormatError : public Error {
 public:
  using Error::Error;
};

// The file system failed us: missing file, short read, failed write.
class IoError : public Error {
 public:
  using Error::Error;
};

// A manifest record is semantically invalid.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A metric is undefined for the given input (e.g. only one class present).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

WSVAD_NAMESPACE_END

#endif  // WSVAD_ERRORS_H_
