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

// The gradient suite: every primitive op, composite block and loss checked
// against central finite differences in double precision. Only the wsvad_f64
// library defines these functions.

#ifndef WSVAD_GRADCHECK_H_
#define WSVAD_GRADCHECK_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace wsvad::gradcheck {

struct SuiteOptions {
  std::size_t seeds = 5;
  std::uint64_t seed = 0;  // first seed; case i uses seed .. seed + seeds - 1
  double tolerance = 1e-3;
  std::size_t max_probes = 64;
  std::string filter;  // substring of case names; empty runs everything
};

struct CaseResult {
  std::string group;  // "op", "block" or "loss"
  std::string name;
  std::size_t seeds = 0;
  double max_error = 0.0;
  std::string worst_input;
  double seconds = 0.0;
  bool passed = false;
};

std::vector<std::string> case_names();
std::vector<CaseResult> run_suite(const SuiteOptions& opts);

}  // namespace wsvad::gradcheck

#endif  // WSVAD_GRADCHECK_H_
