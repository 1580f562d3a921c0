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

#include <compare>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace rtbe {

// All clocks and durations are integer microseconds.
using Micros = std::int64_t;
using RequestId = std::int64_t;

inline constexpr Micros kInfiniteTime = std::numeric_limits<Micros>::max();

enum class RequestClass { kRealTime, kBestEffort };

enum class Phase { kWaiting, kPending, kRunning, kFinished, kDropped };

std::string_view to_string(RequestClass cls);
std::string_view to_string(Phase phase);

struct SloConfig {
  Micros ttft_target = 400'000;
  Micros tpot_target = 200'000;
  int token_group_size = 1;

  // Throws ContractViolation on non-positive targets or group size.
  void validate() const;
};

// One inference request. The token group fields track the deadline the
// scheduler is currently working against: `group_remaining` tokens are
// still owed in the open group, and `group_elapsed` is the time since the
// previous group completed (or since arrival for the first group).
struct Request {
  RequestId id = 0;
  RequestClass cls = RequestClass::kRealTime;
  Micros arrival_time = 0;
  int prompt_len = 0;
  int target_output_len = 0;
  int generated = 0;
  Phase phase = Phase::kWaiting;
  int context_len = 0;
  Micros last_token_emit_time = -1;

  int group_remaining = 0;
  int group_tokens = 0;       // size of the open group
  int group_first_token = 0;  // value of `generated` when the group opened
  Micros group_start = 0;
  Micros group_elapsed = 0;

  // True while no KV cache is held on the device: the next iteration for
  // this request is a (re)prefill over its whole context.
  bool needs_prefill = true;
  int wave = -1;  // BE submission wave, -1 for RT

  bool is_rt() const { return cls == RequestClass::kRealTime; }
  bool live() const { return phase != Phase::kFinished; }
};

Request make_request(RequestId id, RequestClass cls, Micros arrival, int prompt_len,
                     int output_len, const SloConfig& slo);

// Deadline budget of the open token group: the TTFT target for the group
// holding the first output token, otherwise TPOT times the group size.
Micros group_slo_target(const Request& req, const SloConfig& slo);

// SLO - elapsed - (k - 1) * t_avg for an RT request. Negative when late.
Micros remaining_time(const Request& req, const SloConfig& slo, Micros t_avg);

// Refreshes group_elapsed against the simulation clock.
void sync_elapsed(Request& req, Micros now);

// Books one emitted token. Returns true when the request just finished.
bool advance_token_group(Request& req, Micros now, int group_size);

// Tokens that must be written to the KV cache if `req` runs this iteration.
inline int kv_tokens_for_iteration(const Request& req) {
  return req.needs_prefill ? req.context_len : 1;
}

// Requests are stored densely: a request's id is its index.
using RequestTable = std::vector<Request>;

struct QueueSet {
  std::vector<RequestId> rt_waiting;
  std::vector<RequestId> rt_pending;
  std::vector<RequestId> be_waiting;
  std::vector<RequestId> be_pending;

  std::size_t rt_count() const { return rt_waiting.size() + rt_pending.size(); }
  std::size_t be_count() const { return be_waiting.size() + be_pending.size(); }
  bool empty() const { return rt_count() == 0 && be_count() == 0; }

  // Inserts into the right waiting queue keeping arrival order.
  void enqueue_waiting(const Request& req);
  void enqueue_pending(const Request& req);
  // Removes `id` from whichever queue holds it. Returns false if absent.
  bool remove(RequestId id);
  // Moves a request from its waiting queue to the pending queue.
  void promote(const Request& req);
};

// Lexicographic (remaining_time, arrival_time, id) ordering key.
struct PriorityKey {
  Micros remaining = 0;
  Micros arrival = 0;
  RequestId id = 0;

  auto operator<=>(const PriorityKey&) const = default;
};

PriorityKey priority_key(const Request& req, const SloConfig& slo, Micros t_avg);

// Yields queued RT requests most urgent first. Only the pending queue is
// sorted; the waiting queue is already in arrival order, which is also its
// urgency order, so the two are merged by polling both heads.
class RtPriorityPuller {
 public:
  RtPriorityPuller(const RequestTable& requests, const QueueSet& queues,
                   const SloConfig& slo, Micros t_avg);

  std::optional<RequestId> next();
  // Smallest remaining time across both queues, kInfiniteTime when empty.
  Micros min_remaining() const;

 private:
  std::vector<PriorityKey> pending_;
  std::vector<PriorityKey> waiting_;
  std::size_t pending_pos_ = 0;
  std::size_t waiting_pos_ = 0;
};

std::vector<RequestId> pull_rt_in_priority_order(const RequestTable& requests,
                                                 const QueueSet& queues,
                                                 const SloConfig& slo, Micros t_avg);

}  // namespace rtbe
