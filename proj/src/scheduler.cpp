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

#include "rtbe/scheduler.h"

#include <algorithm>
#include <optional>
#include <tuple>

#include <fmt/format.h>

#include "rtbe/errors.h"

namespace rtbe {

std::string_view to_string(SchedulerKind kind) {
  switch (kind) {
    case SchedulerKind::kPacking:
      return "packing";
    case SchedulerKind::kFcfs:
      return "fcfs";
    case SchedulerKind::kRoundRobin:
      return "rr";
  }
  return "unknown";
}

SchedulerKind parse_scheduler_kind(std::string_view name) {
  if (name == "packing") return SchedulerKind::kPacking;
  if (name == "fcfs") return SchedulerKind::kFcfs;
  if (name == "rr") return SchedulerKind::kRoundRobin;
  throw ConfigError(fmt::format("unknown scheduler '{}' (expected packing, fcfs or rr)", name));
}

SchedulerState adapt_batch_size(SchedulerState state, bool saw_rt, bool overran) {
  if (overran) {
    state.b_curr = state.b_base;
  } else if (!saw_rt) {
    state.b_curr = std::min(state.b_curr * 2, state.b_max);
  }
  return state;
}

namespace {

struct Selected {
  RequestId id;
  AllocationPlan plan;
  BatchEntry entry;
};

void finish_decision(ScheduleDecision& d, const std::vector<Selected>& rt,
                     const std::vector<Selected>& be, const BatchCostAccumulator& acc,
                     const RequestTable& requests, const SloConfig& slo,
                     const CostModels& models, Micros t_avg) {
  for (const auto& s : rt) {
    d.rt_ready.push_back(s.id);
    const Request& r = requests[s.id];
    d.rt_remaining.push_back(remaining_time(r, slo, t_avg));
    d.rt_group_remaining.push_back(r.group_remaining);
    if (is_late(r, slo, models, t_avg)) {
      ++d.late_rt;
    }
  }
  for (const auto& s : be) {
    d.be_ready.push_back(s.id);
  }
  for (const auto* list : {&rt, &be}) {
    for (const auto& s : *list) {
      d.plans.push_back(s.plan);
      d.swap_blocks_total += s.plan.m_cpu;
      d.m_new_total += s.plan.m_new;
    }
  }
  d.estimated_time = acc.estimate();
}

// True if a selected BE plan moves checkpointed slots out from under the
// writes of `rt_sel`. Such a plan was priced against that RT request, so the
// RT request cannot be back-popped without invalidating it.
bool relocates_under(const std::vector<Selected>& be, const Selected& rt_sel) {
  for (const auto& s : be) {
    for (const auto& [b, n] : s.plan.relocations) {
      (void)n;
      for (const auto& w : rt_sel.plan.writes) {
        if (w.block == b) {
          return true;
        }
      }
    }
  }
  return false;
}

}  // namespace

bool is_late(const Request& req, const SloConfig& slo, const CostModels& models, Micros t_avg) {
  const BatchEntry entry = batch_entry_for(req);
  return remaining_time(req, slo, t_avg) < predict_iteration({&entry, 1}, 0, models);
}

ResidualBudget residual_budget(const RequestTable& requests, const QueueSet& queues,
                               const SloConfig& slo, const CostModels& models, Micros t_avg,
                               bool late_relief) {
  ResidualBudget b;
  for (const auto* q : {&queues.rt_pending, &queues.rt_waiting}) {
    for (RequestId id : *q) {
      const Request& r = requests[id];
      const Micros rem = remaining_time(r, slo, t_avg);
      b.raw = std::min(b.raw, rem);
      if (is_late(r, slo, models, t_avg)) {
        ++b.late;
        if (late_relief) {
          b.effective = std::min(b.effective, group_slo_target(r, slo));
          continue;
        }
      }
      b.effective = std::min(b.effective, rem);
    }
  }
  return b;
}

ScheduleDecision schedule_packing(SchedContext& ctx, const SchedulerState& state,
                                  const PackingPolicy& policy) {
  ScheduleDecision d;
  auto& requests = ctx.requests;
  const Micros t_avg = state.t_avg;
  d.saw_rt = ctx.queues.rt_count() > 0;

  RtPriorityPuller puller(requests, ctx.queues, ctx.slo, t_avg);
  const ResidualBudget budget =
      residual_budget(requests, ctx.queues, ctx.slo, ctx.models, t_avg, policy.late_relief);
  d.t_min_res = budget.effective;
  d.raw_min_remaining = budget.raw;

  std::optional<PlanningSession> session(std::in_place, ctx.kv);
  d.empty_blocks = session->initial_empty_blocks();
  BatchCostAccumulator acc(ctx.models);
  std::vector<Selected> rt, be;

  // Step 1: most urgent RT requests first.
  while (auto id = puller.next()) {
    if (static_cast<int>(rt.size()) >= state.b_curr) {
      break;
    }
    Request& r = requests[*id];
    const int tokens = kv_tokens_for_iteration(r);
    auto plan = session->find_preempt_block(r, tokens);
    if (!plan) {
      if (!rt.empty()) {
        if (!ctx.kv.bidirectional()) {
          d.recompute.push_back(r.id);
        }
        break;
      }
      // Nothing selected yet, so no claims are outstanding: free memory by
      // dropping other requests and plan again on the new pool state.
      const auto dropped = ctx.kv.drop_victims(ctx.kv.blocks_for(tokens), requests, r.id,
                                               ctx.slo, t_avg, &d.drop_actions);
      for (RequestId v : dropped) {
        requests[v].needs_prefill = true;
        d.dropped.push_back(v);
      }
      session.emplace(ctx.kv);
      d.empty_blocks = session->initial_empty_blocks();
      plan = session->find_preempt_block(r, tokens);
      if (!plan) {
        throw ConsistencyError(
            fmt::format("RT request {} still has no blocks after dropping victims", r.id));
      }
    }
    const BatchEntry entry = batch_entry_for(r);
    if (acc.estimate_with(entry, plan->m_cpu) > d.t_min_res) {
      if (rt.empty()) {
        // Already too late even alone: run it by itself rather than let it starve.
        d.degenerate = true;
        acc.add(entry, plan->m_cpu);
        rt.push_back({r.id, std::move(*plan), entry});
      } else {
        session->unclaim(*plan);
      }
      break;
    }
    acc.add(entry, plan->m_cpu);
    rt.push_back({r.id, std::move(*plan), entry});
  }

  // Step 2: BE requests by ascending swap need, packing or replacing.
  if (!d.degenerate) {
    std::vector<std::tuple<int, Micros, RequestId>> order;
    order.reserve(ctx.queues.be_count());
    for (const auto* q : {&ctx.queues.be_pending, &ctx.queues.be_waiting}) {
      for (RequestId id : *q) {
        order.emplace_back(ctx.kv.swap_in_plan(id), requests[id].arrival_time, id);
      }
    }
    std::sort(order.begin(), order.end());

    // Blocks a request still has to add before it finishes, counting the
    // free tail of the blocks its current context already fills.
    auto growth_blocks = [&](const Request& r) {
      return std::max(0, ctx.kv.blocks_for(r.prompt_len + r.target_output_len) -
                             ctx.kv.blocks_for(r.context_len));
    };
    int reserve = 0;
    if (policy.be_headroom) {
      for (const auto& [m_cpu_hint, arrival, id] : order) {
        if (ctx.kv.footprint(id) > 0) {
          reserve += growth_blocks(requests[id]);
        }
      }
    }

    for (const auto& [m_cpu_hint, arrival, id] : order) {
      (void)m_cpu_hint;
      (void)arrival;
      Request& r = requests[id];
      const int tokens = kv_tokens_for_iteration(r);
      const bool fresh = ctx.kv.footprint(id) == 0;
      auto plan = session->find_block(r, tokens);
      if (!plan) {
        break;
      }
      if (policy.be_headroom && fresh &&
          session->empty_blocks() < reserve + growth_blocks(r)) {
        // Not a placement failure: requests already holding KV may still fit.
        session->unclaim(*plan);
        continue;
      }
      const BatchEntry entry = batch_entry_for(r);
      const int size_with = static_cast<int>(rt.size() + be.size()) + 1;
      if (size_with <= state.b_curr && acc.estimate_with(entry, plan->m_cpu) <= d.t_min_res) {
        acc.add(entry, plan->m_cpu);
        be.push_back({id, std::move(*plan), entry});
        reserve += fresh ? growth_blocks(r) : 0;
        continue;
      }
      session->unclaim(*plan);
      if (rt.empty() || relocates_under(be, rt.back())) {
        break;
      }
      Selected last = std::move(rt.back());
      rt.pop_back();
      session->unclaim(last.plan);
      acc.remove(last.entry, last.plan.m_cpu);
      auto retry = session->find_block(r, tokens);
      if (retry && size_with - 1 <= state.b_curr &&
          acc.estimate_with(entry, retry->m_cpu) <= d.t_min_res) {
        acc.add(entry, retry->m_cpu);
        be.push_back({id, std::move(*retry), entry});
        reserve += fresh ? growth_blocks(r) : 0;
        d.replaced.push_back(last.id);
        continue;
      }
      if (retry) {
        session->unclaim(*retry);
      }
      session->claim(last.plan);
      acc.add(last.entry, last.plan.m_cpu);
      rt.push_back(std::move(last));
      break;
    }
  }

  finish_decision(d, rt, be, acc, requests, ctx.slo, ctx.models, t_avg);
  return d;
}

ScheduleDecision PackingScheduler::schedule(SchedContext& ctx) {
  return schedule_packing(ctx, state_, policy_);
}

void PackingScheduler::after_iteration(const ScheduleDecision& decision, Micros observed) {
  state_.t_avg = update_t_avg(state_.t_avg, observed, decay_);
  const bool overran = decision.estimated_time > decision.t_min_res;
  const Micros t_avg = state_.t_avg;
  state_ = adapt_batch_size(state_, decision.saw_rt, overran);
  state_.t_avg = t_avg;
}

// ---------------------------------------------------------------------------
// Baselines

void BaselineScheduler::after_iteration(const ScheduleDecision& decision, Micros observed) {
  (void)decision;
  state_.t_avg = update_t_avg(state_.t_avg, observed, decay_);
}

void BaselineScheduler::on_released(const Request& req) {
  const auto it = reservation_.find(req.id);
  if (it != reservation_.end()) {
    reserved_total_ -= it->second;
    reservation_.erase(it);
  }
}

void BaselineScheduler::admit(SchedContext& ctx, const std::vector<RequestId>& order,
                              std::vector<RequestId>& running) {
  for (RequestId id : order) {
    if (static_cast<int>(running.size()) >= cap_) {
      return;
    }
    if (reservation_.count(id)) {
      continue;
    }
    const Request& r = ctx.requests[id];
    const int need = ctx.kv.blocks_for(r.prompt_len + r.target_output_len);
    if (reserved_total_ + need > ctx.kv.num_blocks()) {
      return;  // head of line blocks everything behind it
    }
    reservation_[id] = need;
    reserved_total_ += need;
    running.push_back(id);
  }
}

ScheduleDecision BaselineScheduler::build(SchedContext& ctx, const std::vector<RequestId>& batch) {
  ScheduleDecision d;
  d.saw_rt = ctx.queues.rt_count() > 0;
  // Informational only; the baselines do not pack against a budget.
  d.t_min_res = d.raw_min_remaining =
      residual_budget(ctx.requests, ctx.queues, ctx.slo, ctx.models, state_.t_avg, false).raw;
  PlanningSession session(ctx.kv);
  d.empty_blocks = session.initial_empty_blocks();
  BatchCostAccumulator acc(ctx.models);
  std::vector<Selected> rt, be;
  for (RequestId id : batch) {
    const Request& r = ctx.requests[id];
    const int tokens = kv_tokens_for_iteration(r);
    auto plan = r.is_rt() ? session.find_preempt_block(r, tokens) : session.find_block(r, tokens);
    if (!plan) {
      throw ConsistencyError(fmt::format("request {} exceeded its block reservation", id));
    }
    const BatchEntry entry = batch_entry_for(r);
    acc.add(entry, plan->m_cpu);
    (r.is_rt() ? rt : be).push_back({id, std::move(*plan), entry});
  }
  finish_decision(d, rt, be, acc, ctx.requests, ctx.slo, ctx.models, state_.t_avg);
  return d;
}

namespace {

std::vector<RequestId> merge_by_arrival(const RequestTable& requests,
                                        const std::vector<RequestId>& a,
                                        const std::vector<RequestId>& b) {
  std::vector<RequestId> out;
  out.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out),
             [&](RequestId x, RequestId y) {
               const auto& rx = requests[x];
               const auto& ry = requests[y];
               return std::tie(rx.arrival_time, rx.id) < std::tie(ry.arrival_time, ry.id);
             });
  return out;
}

}  // namespace

ScheduleDecision FcfsScheduler::schedule(SchedContext& ctx) {
  admit(ctx, merge_by_arrival(ctx.requests, ctx.queues.rt_waiting, ctx.queues.be_waiting),
        running_);
  return build(ctx, running_);
}

void FcfsScheduler::on_released(const Request& req) {
  BaselineScheduler::on_released(req);
  std::erase(running_, req.id);
}

ScheduleDecision RoundRobinScheduler::schedule(SchedContext& ctx) {
  for (int attempt = 0; attempt < 2; ++attempt) {
    const RequestClass cls =
        attempt == 0 ? turn_
                     : (turn_ == RequestClass::kRealTime ? RequestClass::kBestEffort
                                                         : RequestClass::kRealTime);
    const bool is_rt = cls == RequestClass::kRealTime;
    auto& running = is_rt ? running_rt_ : running_be_;
    admit(ctx, is_rt ? ctx.queues.rt_waiting : ctx.queues.be_waiting, running);
    if (!running.empty()) {
      turn_ = is_rt ? RequestClass::kBestEffort : RequestClass::kRealTime;
      return build(ctx, running);
    }
  }
  return build(ctx, {});
}

void RoundRobinScheduler::on_released(const Request& req) {
  BaselineScheduler::on_released(req);
  std::erase(req.is_rt() ? running_rt_ : running_be_, req.id);
}

std::unique_ptr<Scheduler> make_scheduler(const SchedulerOptions& options) {
  switch (options.kind) {
    case SchedulerKind::kPacking: {
      SchedulerState s;
      s.b_base = s.b_curr = options.b_base;
      s.b_max = options.b_max;
      return std::make_unique<PackingScheduler>(s, options.t_avg_decay, options.packing);
    }
    case SchedulerKind::kFcfs:
      return std::make_unique<FcfsScheduler>(options.baseline_cap, options.t_avg_decay);
    case SchedulerKind::kRoundRobin:
      return std::make_unique<RoundRobinScheduler>(options.baseline_cap, options.t_avg_decay);
  }
  throw ConfigError("unknown scheduler kind");
}

}  // namespace rtbe
