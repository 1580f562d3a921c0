/* Copyright 2026 The rtbe-sim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstdint>
#include <vector>

#include "rtbe/cost_model.h"

namespace rtbe::testing {

// Profile samples on a power-of-two grid (l_n from 1 to 512, l_a from 1 to
// 2048) drawn from `truth` with uniform multiplicative noise in
// [-noise, +noise]. Prefill samples use l_a = l_n * 2^j so that l_a >= l_n.
std::vector<ProfileSample> profile_grid(const LatencyModel& truth, ProfileKind kind, int n,
                                        double noise, std::uint64_t seed);

// Largest relative error over the three coefficients.
double max_relative_error(const LatencyModel& fitted, const LatencyModel& truth);

}  // namespace rtbe::testing
