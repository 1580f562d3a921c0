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

#include "rtbe/core.h"

#include <algorithm>

#include "rtbe/errors.h"

namespace rtbe {

std::string_view to_string(RequestClass cls) {
  return cls == RequestClass::kRealTime ? "RT" : "BE";
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::kWaiting:
      return "waiting";
    case Phase::kPending:
      return "pending";
    case Phase::kRunning:
      return "running";
    case Phase::kFinished:
      return "finished";
    case Phase::kDropped:
      return "dropped";
  }
  return "unknown";
}

void SloConfig::validate() const {
  if (ttft_target <= 0 || tpot_target <= 0) {
    throw ContractViolation("SLO targets must be positive");
  }
  if (token_group_size < 1) {
    throw ContractViolation("token group size must be at least 1");
  }
}

Request make_request(RequestId id, RequestClass cls, Micros arrival, int prompt_len,
                     int output_len, const SloConfig& slo) {
  if (prompt_len < 1 || output_len < 1) {
    throw ContractViolation("request lengths must be at least 1");
  }
  Request req;
  req.id = id;
  req.cls = cls;
  req.arrival_time = arrival;
  req.prompt_len = prompt_len;
  req.target_output_len = output_len;
  req.context_len = prompt_len;
  req.group_tokens = std::min(slo.token_group_size, output_len);
  req.group_remaining = req.group_tokens;
  req.group_first_token = 0;
  req.group_start = arrival;
  return req;
}

Micros group_slo_target(const Request& req, const SloConfig& slo) {
  if (req.group_first_token == 0) {
    return slo.ttft_target;
  }
  return slo.tpot_target * req.group_tokens;
}

Micros remaining_time(const Request& req, const SloConfig& slo, Micros t_avg) {
  if (!req.is_rt()) {
    throw ContractViolation("remaining_time is defined for RT requests only");
  }
  if (req.phase == Phase::kFinished) {
    throw ContractViolation("remaining_time called on a finished request");
  }
  const Micros k = std::max(req.group_remaining, 1);
  return group_slo_target(req, slo) - req.group_elapsed - (k - 1) * t_avg;
}

void sync_elapsed(Request& req, Micros now) {
  req.group_elapsed = std::max<Micros>(0, now - req.group_start);
}

bool advance_token_group(Request& req, Micros now, int group_size) {
  if (req.phase == Phase::kFinished) {
    throw ContractViolation("advance_token_group called on a finished request");
  }
  if (req.generated >= req.target_output_len) {
    throw ContractViolation("request already produced all of its tokens");
  }
  ++req.generated;
  ++req.context_len;
  --req.group_remaining;
  req.last_token_emit_time = now;

  const int left = req.target_output_len - req.generated;
  if (req.group_remaining == 0) {
    req.group_start = now;
    req.group_elapsed = 0;
    req.group_first_token = req.generated;
    req.group_tokens = std::min(group_size, left);
    req.group_remaining = req.group_tokens;
  }
  if (left == 0) {
    req.phase = Phase::kFinished;
    return true;
  }
  return false;
}

// Callers release arrivals in time order, so appending keeps arrival order.
void QueueSet::enqueue_waiting(const Request& req) {
  (req.is_rt() ? rt_waiting : be_waiting).push_back(req.id);
}

void QueueSet::enqueue_pending(const Request& req) {
  (req.is_rt() ? rt_pending : be_pending).push_back(req.id);
}

bool QueueSet::remove(RequestId id) {
  for (auto* queue : {&rt_waiting, &rt_pending, &be_waiting, &be_pending}) {
    auto it = std::find(queue->begin(), queue->end(), id);
    if (it != queue->end()) {
      queue->erase(it);
      return true;
    }
  }
  return false;
}

void QueueSet::promote(const Request& req) {
  auto& waiting = req.is_rt() ? rt_waiting : be_waiting;
  auto it = std::find(waiting.begin(), waiting.end(), req.id);
  if (it == waiting.end()) {
    return;
  }
  waiting.erase(it);
  enqueue_pending(req);
}

PriorityKey priority_key(const Request& req, const SloConfig& slo, Micros t_avg) {
  return PriorityKey{remaining_time(req, slo, t_avg), req.arrival_time, req.id};
}

RtPriorityPuller::RtPriorityPuller(const RequestTable& requests, const QueueSet& queues,
                                   const SloConfig& slo, Micros t_avg) {
  pending_.reserve(queues.rt_pending.size());
  for (RequestId id : queues.rt_pending) {
    pending_.push_back(priority_key(requests[id], slo, t_avg));
  }
  std::sort(pending_.begin(), pending_.end());

  waiting_.reserve(queues.rt_waiting.size());
  for (RequestId id : queues.rt_waiting) {
    waiting_.push_back(priority_key(requests[id], slo, t_avg));
  }
  // Arrival order equals urgency order unless a first group was clamped by a
  // short output; only then is the waiting side sorted as well.
  if (!std::is_sorted(waiting_.begin(), waiting_.end())) {
    std::sort(waiting_.begin(), waiting_.end());
  }
}

std::optional<RequestId> RtPriorityPuller::next() {
  const bool has_pending = pending_pos_ < pending_.size();
  const bool has_waiting = waiting_pos_ < waiting_.size();
  if (!has_pending && !has_waiting) {
    return std::nullopt;
  }
  if (has_pending && (!has_waiting || pending_[pending_pos_] < waiting_[waiting_pos_])) {
    return pending_[pending_pos_++].id;
  }
  return waiting_[waiting_pos_++].id;
}

Micros RtPriorityPuller::min_remaining() const {
  Micros best = kInfiniteTime;
  if (!pending_.empty()) {
    best = std::min(best, pending_.front().remaining);
  }
  if (!waiting_.empty()) {
    best = std::min(best, waiting_.front().remaining);
  }
  return best;
}

std::vector<RequestId> pull_rt_in_priority_order(const RequestTable& requests,
                                                 const QueueSet& queues,
                                                 const SloConfig& slo, Micros t_avg) {
  RtPriorityPuller puller(requests, queues, slo, t_avg);
  std::vector<RequestId> order;
  order.reserve(queues.rt_count());
  while (auto id = puller.next()) {
    order.push_back(*id);
  }
  return order;
}

}  // namespace rtbe
