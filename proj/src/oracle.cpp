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

#include "rtbe/oracle.h"

#include <algorithm>
#include <bit>
#include <limits>
#include <tuple>

#include <fmt/format.h>

#include "rtbe/errors.h"

namespace rtbe {

namespace {

SelectionCheck check_mask(const OracleInstance& inst, std::uint32_t mask, DeadlineForm form) {
  SelectionCheck c;
  std::vector<BatchEntry> entries;
  std::vector<RequestId> ids;
  std::int64_t m_new = 0;
  std::int64_t m_cpu = 0;
  for (std::size_t i = 0; i < inst.items.size(); ++i) {
    if (mask & (1u << i)) {
      entries.push_back(inst.items[i].entry);
      ids.push_back(inst.items[i].id);
      m_new += inst.items[i].m_new;
      m_cpu += inst.items[i].m_cpu;
    }
  }
  c.cap_ok = static_cast<int>(entries.size()) <= inst.b_curr;
  if (inst.joint_new_blocks) {
    const auto joint = inst.joint_new_blocks(ids);
    c.memory_ok = joint && *joint <= inst.m_ept;
  } else {
    c.memory_ok = m_new <= inst.m_ept;
  }
  c.estimated = predict_iteration(entries, m_cpu, inst.models);

  Micros guard = std::numeric_limits<Micros>::max();
  for (std::size_t i = 0; i < inst.items.size(); ++i) {
    const auto& it = inst.items[i];
    if (it.cls != RequestClass::kRealTime) {
      continue;
    }
    const bool x = (mask & (1u << i)) != 0;
    if (form == DeadlineForm::kStrict) {
      const Micros lhs = it.elapsed + (it.group_remaining - (x ? 1 : 0)) * inst.t_avg + c.estimated;
      if (lhs > it.slo_target) {
        c.deadline_ok = false;
      }
    } else {
      guard = std::min(guard, it.slo_target - it.elapsed - (it.group_remaining - 1) * inst.t_avg);
    }
  }
  if (form == DeadlineForm::kResidualGuard && c.estimated > guard) {
    c.deadline_ok = false;
  }
  return c;
}

}  // namespace

SelectionCheck check_selection(const OracleInstance& inst, std::span<const RequestId> selected,
                               DeadlineForm form) {
  if (inst.items.size() > 32) {
    throw OracleTooLarge("selection checker supports at most 32 items");
  }
  std::uint32_t mask = 0;
  for (RequestId id : selected) {
    const auto it = std::find_if(inst.items.begin(), inst.items.end(),
                                 [&](const OracleItem& o) { return o.id == id; });
    if (it == inst.items.end()) {
      throw ContractViolation(fmt::format("request {} is not part of the instance", id));
    }
    const auto bit = 1u << static_cast<unsigned>(it - inst.items.begin());
    if (mask & bit) {
      throw ContractViolation(fmt::format("request {} selected twice", id));
    }
    mask |= bit;
  }
  return check_mask(inst, mask, form);
}

OracleResult oracle_pack(const OracleInstance& inst, DeadlineForm form) {
  const int n = static_cast<int>(inst.items.size());
  if (n > kOracleMaxRequests) {
    throw OracleTooLarge(fmt::format("{} requests exceed the exhaustive bound of {}", n,
                                     kOracleMaxRequests));
  }
  OracleResult best;
  std::uint32_t be_mask = 0;
  for (int i = 0; i < n; ++i) {
    if (inst.items[i].cls == RequestClass::kBestEffort) {
      be_mask |= 1u << i;
    }
  }
  const std::uint32_t limit = 1u << n;
  std::uint32_t best_mask = 0;
  for (std::uint32_t mask = 0; mask < limit; ++mask) {
    if (std::popcount(mask) > inst.b_curr) {
      continue;
    }
    ++best.subsets_checked;
    const int be = std::popcount(mask & be_mask);
    if (best.feasible && be <= best.best_be) {
      continue;
    }
    if (check_mask(inst, mask, form).ok()) {
      best.feasible = true;
      best.best_be = be;
      best_mask = mask;
    }
  }
  if (best.feasible) {
    for (int i = 0; i < n; ++i) {
      if (best_mask & (1u << i)) {
        best.witness.push_back(inst.items[i].id);
      }
    }
  }
  return best;
}

OracleInstance make_oracle_instance(const RequestTable& requests, const QueueSet& queues,
                                    const KvManager& kv, const CostModels& models,
                                    const SloConfig& slo, Micros t_avg, int b_curr) {
  OracleInstance inst;
  inst.b_curr = b_curr;
  inst.m_ept = kv.empty_blocks();
  inst.t_avg = t_avg;
  inst.models = models;

  std::vector<RequestId> order = pull_rt_in_priority_order(requests, queues, slo, t_avg);
  std::vector<std::tuple<int, Micros, RequestId>> be;
  for (const auto* q : {&queues.be_pending, &queues.be_waiting}) {
    for (RequestId id : *q) {
      be.emplace_back(kv.swap_in_plan(id), requests[id].arrival_time, id);
    }
  }
  std::sort(be.begin(), be.end());
  for (const auto& [swap, arrival, id] : be) {
    order.push_back(id);
  }

  for (RequestId id : order) {
    const Request& r = requests[id];
    OracleItem item;
    item.id = id;
    item.cls = r.cls;
    item.entry = batch_entry_for(r);
    PlanningSession session(kv);
    const int tokens = kv_tokens_for_iteration(r);
    auto plan = r.is_rt() ? session.find_preempt_block(r, tokens) : session.find_block(r, tokens);
    // A request that cannot be placed at all can never be part of a
    // feasible selection.
    item.m_new = plan ? plan->m_new : kv.num_blocks() + 1;
    item.m_cpu = plan ? plan->m_cpu : 0;
    if (r.is_rt()) {
      item.elapsed = r.group_elapsed;
      item.group_remaining = std::max(r.group_remaining, 1);
      item.slo_target = group_slo_target(r, slo);
    }
    inst.items.push_back(item);
  }

  // Small instances only, so copying the pool and the requests is cheap.
  inst.joint_new_blocks = [kv, requests](std::span<const RequestId> ids) -> std::optional<int> {
    PlanningSession session(kv);
    int m_new = 0;
    for (RequestId id : ids) {
      const Request& r = requests[id];
      const int tokens = kv_tokens_for_iteration(r);
      const auto plan =
          r.is_rt() ? session.find_preempt_block(r, tokens) : session.find_block(r, tokens);
      if (!plan) {
        return std::nullopt;
      }
      m_new += plan->m_new;
    }
    return m_new;
  };
  return inst;
}

}  // namespace rtbe
