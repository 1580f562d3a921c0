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

#include "fixtures.h"

#include <algorithm>
#include <cmath>
#include <random>

namespace rtbe::testing {

std::vector<ProfileSample> profile_grid(const LatencyModel& truth, ProfileKind kind, int n,
                                        double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-noise, noise);
  std::vector<ProfileSample> out;
  for (int i = 0; i < n; ++i) {
    const std::int64_t ln = std::int64_t{1} << (i % 10);
    const int j = (i / 10) % 12;
    const std::int64_t la = kind == ProfileKind::kPrefill ? ln << (j % 3) : std::int64_t{1} << j;
    const double exact = truth.evaluate(static_cast<double>(ln), static_cast<double>(la));
    out.push_back({kind, ln, la, noise > 0.0 ? exact * (1.0 + jitter(rng)) : exact});
  }
  return out;
}

double max_relative_error(const LatencyModel& fitted, const LatencyModel& truth) {
  auto rel = [](double got, double want) {
    return want == 0.0 ? std::abs(got) : std::abs(got - want) / std::abs(want);
  };
  return std::max({rel(fitted.alpha0, truth.alpha0), rel(fitted.alpha1, truth.alpha1),
                   rel(fitted.beta, truth.beta)});
}

}  // namespace rtbe::testing
