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
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rtbe/core.h"

namespace rtbe {

enum class ExecPhase { kPrefill, kDecode };

// latency = alpha0 * l_n + alpha1 * l_n * l_a + beta
struct LatencyModel {
  double alpha0 = 0.0;
  double alpha1 = 0.0;
  double beta = 0.0;

  double evaluate(double l_n, double l_a) const { return alpha0 * l_n + alpha1 * l_n * l_a + beta; }
  // Rounded half-up to whole microseconds.
  Micros predict(std::int64_t l_n, std::int64_t l_a) const;
  // One forward pass over several sequences: the attention term is the sum
  // of each sequence's l_n * l_a, the intercept is paid once.
  Micros predict_batch(std::int64_t sum_n, std::int64_t sum_na) const;

  bool operator==(const LatencyModel&) const = default;
};

// Host-to-device restore time for a number of checkpointed blocks.
struct SwapModel {
  double per_block = 0.0;
  double fixed = 0.0;

  // Zero blocks cost nothing; otherwise per_block * blocks + fixed.
  Micros predict(std::int64_t blocks) const;

  bool operator==(const SwapModel&) const = default;
};

struct CostModels {
  LatencyModel prefill;
  LatencyModel decode;
  SwapModel swap;

  bool operator==(const CostModels&) const = default;
};

// Fixture constants producing iteration times in the tens of milliseconds.
CostModels default_cost_models();

// One request's contribution to the iteration shape.
struct BatchEntry {
  ExecPhase phase = ExecPhase::kDecode;
  std::int64_t l_n = 0;
  std::int64_t l_a = 0;
};

// Prefill reprocesses the whole context; decode feeds one token against it.
BatchEntry batch_entry_for(const Request& req);

// max(t_exec, t_swap). t_exec prices each phase as one pass with
// alpha0 * sum(l_n) + alpha1 * sum(l_n * l_a) + beta and adds the two
// phases. A phase with no entries contributes nothing.
Micros predict_iteration(std::span<const BatchEntry> batch, std::int64_t m_cpu_total,
                         const CostModels& models);

// Running feature sums so the scheduler can price a candidate batch in O(1).
class BatchCostAccumulator {
 public:
  explicit BatchCostAccumulator(const CostModels& models) : models_(&models) {}

  void add(const BatchEntry& entry, std::int64_t m_cpu);
  void remove(const BatchEntry& entry, std::int64_t m_cpu);
  Micros estimate() const;
  // Estimate if `entry` were added, without changing the sums.
  Micros estimate_with(const BatchEntry& entry, std::int64_t m_cpu) const;
  int size() const { return count_; }

 private:
  struct Sums {
    std::int64_t prefill_n = 0;
    std::int64_t prefill_na = 0;
    std::int64_t decode_n = 0;
    std::int64_t decode_na = 0;
    std::int64_t prefill_count = 0;
    std::int64_t decode_count = 0;
    std::int64_t m_cpu = 0;
  };
  Micros evaluate(const Sums& sums) const;
  static void apply(Sums& sums, const BatchEntry& entry, std::int64_t m_cpu, int sign);

  const CostModels* models_;
  Sums sums_;
  int count_ = 0;
};

// Exponential moving average of iteration latency. A previous value of 0
// means "not yet initialized" and adopts the observation directly.
Micros update_t_avg(Micros prev, Micros observed, double decay = 0.9);

enum class ProfileKind { kPrefill, kDecode, kSwap };

// One measured forward pass over a uniform batch: l_n is the total number of
// new tokens and l_a the context length of each sequence. For swap samples
// l_n holds the block count and l_a is unused.
struct ProfileSample {
  ProfileKind kind = ProfileKind::kDecode;
  std::int64_t l_n = 0;
  std::int64_t l_a = 0;
  double latency_us = 0.0;
};

// Least-squares fit of latency = alpha0*l_n + alpha1*l_n*l_a + beta.
// Throws FitError when fewer than three samples or the features are collinear.
LatencyModel fit_latency(std::span<const ProfileSample> samples);
// Least-squares fit of latency = per_block*blocks + fixed.
SwapModel fit_swap(std::span<const ProfileSample> samples);

struct FitReport {
  CostModels models;
  // Root-mean-square and max absolute residual per model, in microseconds.
  double prefill_rms = 0.0, prefill_max = 0.0;
  double decode_rms = 0.0, decode_max = 0.0;
  double swap_rms = 0.0, swap_max = 0.0;
  std::size_t prefill_samples = 0, decode_samples = 0, swap_samples = 0;
};

// Fits all three models from a mixed sample set. A missing swap section
// leaves the swap model at zero.
FitReport fit_models(std::span<const ProfileSample> samples);

// Calibration grid: lengths at powers of two up to `max_len`, latencies drawn
// from `truth` with multiplicative noise of relative size `noise`.
std::vector<ProfileSample> synthesize_profile(const CostModels& truth, std::int64_t max_len,
                                              double noise, std::mt19937_64& rng);

std::vector<ProfileSample> load_profile_csv(const std::string& path);
void save_profile_csv(const std::string& path, std::span<const ProfileSample> samples);

std::string models_to_json(const CostModels& models);
CostModels models_from_json(const std::string& text);
CostModels load_models_json(const std::string& path);
void save_models_json(const std::string& path, const CostModels& models);

}  // namespace rtbe
