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

#ifndef WSVAD_CONFIG_H_
#define WSVAD_CONFIG_H_

// The library is compiled twice: the production build stores tensors in
// float, and a double-precision build backs the finite-difference gradient
// suite. Each build lives in its own inline namespace so both can be linked
// into one binary without clashing symbols.
#if defined(WSVAD_REAL_DOUBLE)
#define WSVAD_PRECISION_NS f64
#else
#define WSVAD_PRECISION_NS f32
#endif

#define WSVAD_NAMESPACE_BEGIN \
  namespace wsvad {           \
  inline namespace WSVAD_PRECISION_NS {
#define WSVAD_NAMESPACE_END \
  }                         \
  }

WSVAD_NAMESPACE_BEGIN

#if defined(WSVAD_REAL_DOUBLE)
using Real = double;
#else
using Real = float;
#endif

WSVAD_NAMESPACE_END

#endif  // WSVAD_CONFIG_H_
