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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rtbe/core.h"
#include "rtbe/cost_model.h"
#include "rtbe/kv_manager.h"

namespace rtbe {

// Largest instance the exhaustive search accepts.
inline constexpr int kOracleMaxRequests = 14;

// Per-RT deadline constraint used by the checker.
enum class DeadlineForm {
  // t_i + (k_i - x_i) * t_avg + T <= SLO_i for every queued RT request.
  kStrict,
  // T <= min over queued RT requests of SLO_i - t_i - (k_i - 1) * t_avg,
  // the guard the packing heuristic enforces.
  kResidualGuard,
};

struct OracleItem {
  RequestId id = 0;
  RequestClass cls = RequestClass::kRealTime;
  BatchEntry entry;
  int m_new = 0;
  int m_cpu = 0;
  // RT only.
  Micros elapsed = 0;
  int group_remaining = 1;
  Micros slo_target = 0;
};

struct OracleInstance {
  std::vector<OracleItem> items;
  int b_curr = 1;
  int m_ept = 0;
  Micros t_avg = 0;
  CostModels models;
  // Empty blocks a selection takes when planned together, items in order,
  // or nullopt if it cannot be placed. Unset means the sum of item m_new.
  std::function<std::optional<int>(std::span<const RequestId>)> joint_new_blocks;
};

struct SelectionCheck {
  bool cap_ok = true;
  bool memory_ok = true;
  bool deadline_ok = true;
  Micros estimated = 0;
  bool ok() const { return cap_ok && memory_ok && deadline_ok; }
};

struct OracleResult {
  bool feasible = false;
  int best_be = 0;
  std::vector<RequestId> witness;
  std::uint64_t subsets_checked = 0;
};

// Checks a selection against the batch cap, memory and deadline constraints.
SelectionCheck check_selection(const OracleInstance& inst, std::span<const RequestId> selected,
                               DeadlineForm form);

// Enumerates every subset of at most b_curr requests and returns the largest
// feasible BE count with one witness. Throws OracleTooLarge above
// kOracleMaxRequests items.
OracleResult oracle_pack(const OracleInstance& inst, DeadlineForm form);

// Describes every queued request of a small system state as oracle items:
// RT requests most urgent first, then BE requests by ascending swap need,
// the order the packing heuristic plans them in. Item m_new and m_cpu come
// from planning each request alone; memory feasibility of a selection is
// judged by planning it jointly on a copy of `kv`, because one request's
// claims change where the next one lands.
OracleInstance make_oracle_instance(const RequestTable& requests, const QueueSet& queues,
                                    const KvManager& kv, const CostModels& models,
                                    const SloConfig& slo, Micros t_avg, int b_curr);

}  // namespace rtbe
