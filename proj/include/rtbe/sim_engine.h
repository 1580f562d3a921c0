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
#include <vector>

#include "rtbe/core.h"
#include "rtbe/cost_model.h"
#include "rtbe/kv_manager.h"
#include "rtbe/scheduler.h"
#include "rtbe/workload.h"

namespace rtbe {

struct PoolConfig {
  int num_blocks = 3000;
  int slots_per_block = 16;
  bool bidirectional = true;
};

struct SimConfig {
  SchedulerOptions scheduler;
  SloConfig slo;
  PoolConfig pool;
  CostModels models = default_cost_models();
  Micros horizon = 600'000'000;
  Micros overhead_us = 0;  // charged to the clock on every nonempty iteration
  std::uint64_t seed = 1;
  // Re-check pool and queue invariants after every iteration (slow).
  bool check_invariants = false;

  void validate() const;
};

// One scheduling iteration. Every request in rt_ids and be_ids emitted one
// token at `end`.
struct IterationRecord {
  std::int64_t index = 0;
  Micros start = 0;
  Micros end = 0;
  Micros estimated = 0;
  std::vector<RequestId> rt_ids;
  std::vector<RequestId> be_ids;
  int swap_blocks = 0;
  int checkpoints = 0;
  int restores = 0;
  int relocations = 0;
  std::vector<RequestId> finished;
  std::vector<RequestId> dropped;
  std::vector<int> released_waves;
  int b_curr = 0;
  Micros t_min_res = kInfiniteTime;
  Micros raw_min_remaining = kInfiniteTime;
  bool degenerate = false;
  int late_rt = 0;
  int empty_blocks = 0;
  int m_new_total = 0;
  std::vector<int> rt_k;           // open group size of each RT entry
  std::vector<Micros> rt_remaining;  // its remaining time at decision

  bool operator==(const IterationRecord&) const = default;
};

struct EventLog {
  std::string scheduler;
  Micros horizon = 0;
  Micros end_clock = 0;
  int token_group_size = 1;
  std::vector<IterationRecord> records;
  // Release time of every request that entered the system, indexed by id;
  // -1 for requests never released.
  std::vector<Micros> release_times;

  bool operator==(const EventLog&) const = default;

  // First line holds the run header, then one line per iteration.
  std::string to_jsonl() const;
  // Inverse of to_jsonl. Throws ParseError with the offending line.
  static EventLog from_jsonl(const std::string& text);
  // SHA-256 of to_jsonl(), hex encoded.
  std::string digest() const;
};

class Simulator {
 public:
  // Request ids are trace positions.
  Simulator(SimConfig config, const Trace& trace);

  // Runs one loop body. Returns false once the horizon is reached or no
  // work remains; the clock never moves past the horizon between steps.
  bool step();
  void run();

  Micros clock() const { return clock_; }
  const EventLog& log() const { return log_; }
  EventLog take_log() { return std::move(log_); }
  const RequestTable& requests() const { return requests_; }
  const QueueSet& queues() const { return queues_; }
  const KvManager& kv() const { return kv_; }
  const Scheduler& scheduler() const { return *scheduler_; }
  // Pool actions of the most recent step, in execution order.
  const std::vector<KvAction>& last_actions() const { return last_actions_; }
  // Verifies queue membership and pool consistency. Throws ConsistencyError.
  void check_invariants() const;

 private:
  void release_arrivals();
  void release_waves(std::vector<int>& released);
  std::optional<Micros> next_arrival() const;
  void drop_kv(RequestId id, std::vector<KvAction>& actions);

  SimConfig config_;
  RequestTable requests_;
  QueueSet queues_;
  KvManager kv_;
  std::unique_ptr<Scheduler> scheduler_;
  EventLog log_;
  Micros clock_ = 0;
  bool done_ = false;

  std::vector<RequestId> timed_;  // requests with a timestamp, by arrival
  std::size_t next_timed_ = 0;
  std::vector<std::vector<RequestId>> waves_;  // waves_[w] for w >= 1
  int current_wave_ = 0;
  std::int64_t be_unfinished_ = 0;  // released or wave-0 BE not yet finished
  std::vector<RequestId> carried_drops_;
  std::vector<KvAction> last_actions_;
};

}  // namespace rtbe
