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
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rtbe/core.h"
#include "rtbe/cost_model.h"
#include "rtbe/kv_manager.h"

namespace rtbe {

enum class SchedulerKind { kPacking, kFcfs, kRoundRobin };

std::string_view to_string(SchedulerKind kind);
// Accepts "packing", "fcfs", "rr". Throws ConfigError otherwise.
SchedulerKind parse_scheduler_kind(std::string_view name);

struct SchedulerState {
  int b_curr = 128;
  int b_base = 128;
  int b_max = 2048;
  Micros t_avg = 0;  // 0 until the first iteration completes
};

// Doubles b_curr (up to b_max) when no RT request was queued; resets it to
// b_base when the batch overran the most urgent residual time.
SchedulerState adapt_batch_size(SchedulerState state, bool saw_rt, bool overran);

struct ScheduleDecision {
  std::vector<RequestId> rt_ready;
  std::vector<RequestId> be_ready;
  std::vector<AllocationPlan> plans;  // one per selected request
  int swap_blocks_total = 0;          // summed m_cpu
  int m_new_total = 0;
  int empty_blocks = 0;  // empty blocks when planning started
  Micros estimated_time = 0;
  // Iteration-time budget the batch was packed against.
  Micros t_min_res = kInfiniteTime;
  // Smallest remaining time over all queued RT requests, late ones included.
  Micros raw_min_remaining = kInfiniteTime;
  bool saw_rt = false;
  // The most urgent RT request could not meet the budget even alone and was
  // scheduled by itself.
  bool degenerate = false;
  // Selected RT requests whose open deadline was already lost.
  int late_rt = 0;
  // Requests whose KV was discarded while planning (drop policy).
  std::vector<RequestId> dropped;
  std::vector<KvAction> drop_actions;
  // RT requests back-popped in favour of BE requests.
  std::vector<RequestId> replaced;
  // RT requests that failed to get blocks with sharing disabled; their KV is
  // discarded after the batch commits and they recompute later.
  std::vector<RequestId> recompute;
  // Remaining time and open group size of each selected RT request at
  // decision time, parallel to rt_ready.
  std::vector<Micros> rt_remaining;
  std::vector<int> rt_group_remaining;

  bool empty() const { return rt_ready.empty() && be_ready.empty(); }
  int size() const { return static_cast<int>(rt_ready.size() + be_ready.size()); }
};

struct SchedContext {
  RequestTable& requests;
  const QueueSet& queues;
  KvManager& kv;
  const CostModels& models;
  const SloConfig& slo;
};

struct ResidualBudget {
  Micros raw = kInfiniteTime;        // min remaining time over queued RT
  Micros effective = kInfiniteTime;  // the budget batches are packed against
  int late = 0;                      // queued RT requests already past saving
};

// A request is late when its remaining time is below the cost of running it
// alone: no batch can meet that deadline any more. With `late_relief` a late
// request contributes the full budget of its open group (the next deadline
// it can still meet) instead of its negative remainder, so one missed token
// does not force every following iteration down to a single request.
// Without it the budget is the plain minimum.
ResidualBudget residual_budget(const RequestTable& requests, const QueueSet& queues,
                               const SloConfig& slo, const CostModels& models, Micros t_avg,
                               bool late_relief);
bool is_late(const Request& req, const SloConfig& slo, const CostModels& models, Micros t_avg);

// Departures from the bare packing loop that keep it live under overload.
struct PackingPolicy {
  // See residual_budget.
  bool late_relief = true;
  // A BE request with no KV yet is admitted only if the empty blocks left
  // afterwards still cover the remaining decode growth of every BE request
  // holding KV, its own included. Without it one burst of BE prefills can
  // fill the pool, after which no BE request can grow again.
  bool be_headroom = true;
};

// Priority-based packing: most urgent RT requests first under the batch
// cap, memory and the residual-time guard, then BE requests by ascending
// swap need, replacing the least urgent RT request when the batch is full.
// Requests dropped to make room have needs_prefill set in `ctx.requests`.
ScheduleDecision schedule_packing(SchedContext& ctx, const SchedulerState& state,
                                  const PackingPolicy& policy = {});

class Scheduler {
 public:
  virtual ~Scheduler() = default;
  virtual SchedulerKind kind() const = 0;
  virtual ScheduleDecision schedule(SchedContext& ctx) = 0;
  // Called once per iteration after the batch ran, with the observed time.
  virtual void after_iteration(const ScheduleDecision& decision, Micros observed) = 0;
  // Called when a request finishes or loses its KV outside the scheduler.
  virtual void on_released(const Request& req) { (void)req; }
  virtual const SchedulerState& state() const = 0;
};

class PackingScheduler final : public Scheduler {
 public:
  PackingScheduler(SchedulerState initial, double t_avg_decay = 0.9, PackingPolicy policy = {})
      : state_(initial), decay_(t_avg_decay), policy_(policy) {}

  SchedulerKind kind() const override { return SchedulerKind::kPacking; }
  ScheduleDecision schedule(SchedContext& ctx) override;
  void after_iteration(const ScheduleDecision& decision, Micros observed) override;
  const SchedulerState& state() const override { return state_; }

 private:
  SchedulerState state_;
  double decay_;
  PackingPolicy policy_;
};

// Shared admission bookkeeping of the two baselines: a request is admitted
// once, holds a whole-lifetime block reservation, and runs every turn until
// it finishes. Blocks are never shared between classes.
class BaselineScheduler : public Scheduler {
 public:
  BaselineScheduler(int cap, double t_avg_decay) : cap_(cap), decay_(t_avg_decay) {
    state_.b_curr = state_.b_base = state_.b_max = cap;
  }

  void after_iteration(const ScheduleDecision& decision, Micros observed) override;
  void on_released(const Request& req) override;
  const SchedulerState& state() const override { return state_; }

 protected:
  // Admits waiting requests of `queue` in order while the running list stays
  // under the cap and the reservation fits. Stops at the first misfit.
  void admit(SchedContext& ctx, const std::vector<RequestId>& order,
             std::vector<RequestId>& running);
  ScheduleDecision build(SchedContext& ctx, const std::vector<RequestId>& batch);

  int cap_;
  double decay_;
  SchedulerState state_;
  std::int64_t reserved_total_ = 0;
  std::unordered_map<RequestId, int> reservation_;
};

class FcfsScheduler final : public BaselineScheduler {
 public:
  explicit FcfsScheduler(int cap, double t_avg_decay = 0.9) : BaselineScheduler(cap, t_avg_decay) {}

  SchedulerKind kind() const override { return SchedulerKind::kFcfs; }
  ScheduleDecision schedule(SchedContext& ctx) override;
  void on_released(const Request& req) override;

 private:
  std::vector<RequestId> running_;
};

class RoundRobinScheduler final : public BaselineScheduler {
 public:
  explicit RoundRobinScheduler(int cap, double t_avg_decay = 0.9)
      : BaselineScheduler(cap, t_avg_decay) {}

  SchedulerKind kind() const override { return SchedulerKind::kRoundRobin; }
  ScheduleDecision schedule(SchedContext& ctx) override;
  void on_released(const Request& req) override;

 private:
  std::vector<RequestId> running_rt_;
  std::vector<RequestId> running_be_;
  RequestClass turn_ = RequestClass::kRealTime;
};

struct SchedulerOptions {
  SchedulerKind kind = SchedulerKind::kPacking;
  int b_base = 128;
  int b_max = 2048;
  int baseline_cap = 128;
  double t_avg_decay = 0.9;
  PackingPolicy packing;
};

std::unique_ptr<Scheduler> make_scheduler(const SchedulerOptions& options);

}  // namespace rtbe
