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

#ifndef WSVAD_OPTIM_H_
#define WSVAD_OPTIM_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wsvad/config.h"
#include "wsvad/tensor.h"

WSVAD_NAMESPACE_BEGIN

// Moment buffers for one parameter group. m[i] and v[i] mirror params[i].
struct AdamState {
  std::int64_t step = 0;
  std::vector<std::vector<Real>> m;
  std::vector<std::vector<Real>> v;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update over `params`, then clears their gradients.
// Throws ContractError if a parameter has no gradient buffer.
void adam_step(std::span<Tensor> params, AdamState& state);

// Adam over named parameter groups, each with its own learning rate.
class Adam {
 public:
  void add_group(std::string name, std::vector<Tensor> params, double lr);

  // Allocates zeroed gradients for every parameter.
  void zero_grad();
  void step();

  std::size_t group_count() const { return groups_.size(); }
  const AdamState& state(std::size_t group) const { return groups_[group].state; }

 private:
  struct Group {
    std::string name;
    std::vector<Tensor> params;
    AdamState state;
  };
  std::vector<Group> groups_;
};

WSVAD_NAMESPACE_END

#endif  // WSVAD_OPTIM_H_
