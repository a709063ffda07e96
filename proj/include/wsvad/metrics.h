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

#ifndef WSVAD_METRICS_H_
#define WSVAD_METRICS_H_

#include <cstdint>
#include <span>

#include "wsvad/config.h"

WSVAD_NAMESPACE_BEGIN

// Area under the ROC curve, computed as the normalized Mann-Whitney U
// statistic with tied pairs counted as 1/2. Labels are 0 (negative) or 1.
// Throws UndefinedMetricError unless both classes are present.
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Average precision: mean over positives of the precision at their rank, with
// items ordered by descending score and ties kept in index order.
// Throws UndefinedMetricError when there is no positive.
double average_precision(std::span<const double> scores,
                         std::span<const std::uint8_t> labels);

// Fraction of (normal) scores strictly above `threshold`; 0 for empty input.
double false_alarm_rate(std::span<const double> normal_scores, double threshold = 0.5);

WSVAD_NAMESPACE_END

#endif  // WSVAD_METRICS_H_
