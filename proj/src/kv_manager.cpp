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

#include "rtbe/kv_manager.h"

#include <algorithm>
#include <json.hpp>

#include <fmt/format.h>

#include "rtbe/errors.h"

namespace rtbe {

namespace {

constexpr RequestId kNoClaim = -1;

int clamp_int(int v, int lo, int hi) { return std::max(lo, std::min(v, hi)); }

void add_segment(std::vector<PlanSegment>& segs, int block, int slots, bool fresh) {
  for (auto& s : segs) {
    if (s.block == block) {
      s.slots += slots;
      return;
    }
  }
  segs.push_back(PlanSegment{block, slots, fresh});
}

}  // namespace

// ---------------------------------------------------------------------------
// PlanningSession

PlanningSession::PlanningSession(const KvManager& kv)
    : kv_(&kv),
      epoch_(kv.epoch_),
      slots_(kv.slots_),
      bidirectional_(kv.bidirectional_),
      initial_empty_(kv.empty_blocks()),
      rt_claim_(kv.blocks_.size(), kNoClaim),
      rt_add_(kv.blocks_.size(), 0),
      be_claim_(kv.blocks_.size(), kNoClaim),
      be_add_(kv.blocks_.size(), 0),
      be_reloc_(kv.blocks_.size(), 0),
      empty_(kv.empty_),
      be_only_(kv.be_only_),
      rt_only_(kv.rt_only_) {}

std::optional<RequestId> PlanningSession::rt_owner(int b) const {
  const auto& blk = kv_->blocks_[b];
  if (blk.rt_owner) {
    return blk.rt_owner;
  }
  if (rt_claim_[b] != kNoClaim) {
    return rt_claim_[b];
  }
  return std::nullopt;
}

std::optional<RequestId> PlanningSession::be_owner(int b) const {
  const auto& blk = kv_->blocks_[b];
  if (blk.be_owner) {
    return blk.be_owner;
  }
  if (be_claim_[b] != kNoClaim) {
    return be_claim_[b];
  }
  return std::nullopt;
}

int PlanningSession::rt_eff(int b) const { return kv_->blocks_[b].rt_used + rt_add_[b]; }

int PlanningSession::be_eff(int b) const {
  return kv_->blocks_[b].be_used - be_reloc_[b] + be_add_[b];
}

int PlanningSession::free_eff(int b) const { return std::max(0, slots_ - rt_eff(b) - be_eff(b)); }

void PlanningSession::unindex(int b) {
  const bool rt = rt_owner(b).has_value();
  const bool be = be_owner(b).has_value();
  if (!rt && !be) {
    empty_.erase(b);
  } else if (be && !rt) {
    be_only_.erase({-free_eff(b), b});
  } else if (rt && !be) {
    rt_only_.erase({-free_eff(b), b});
  }
}

void PlanningSession::index(int b) {
  const bool rt = rt_owner(b).has_value();
  const bool be = be_owner(b).has_value();
  if (!rt && !be) {
    empty_.insert(b);
  } else if (be && !rt) {
    be_only_.insert({-free_eff(b), b});
  } else if (rt && !be) {
    rt_only_.insert({-free_eff(b), b});
  }
}

void PlanningSession::add_rt(int b, RequestId req, int slots, int sign) {
  unindex(b);
  rt_add_[b] += sign * slots;
  if (!kv_->blocks_[b].rt_owner) {
    rt_claim_[b] = rt_add_[b] > 0 ? req : kNoClaim;
  }
  index(b);
}

void PlanningSession::add_be(int b, RequestId req, int slots, int sign) {
  unindex(b);
  be_add_[b] += sign * slots;
  if (!kv_->blocks_[b].be_owner) {
    be_claim_[b] = be_add_[b] > 0 ? req : kNoClaim;
  }
  index(b);
}

void PlanningSession::relocate_be(int b, int slots, int sign) {
  unindex(b);
  be_reloc_[b] += sign * slots;
  index(b);
}

std::optional<AllocationPlan> PlanningSession::find_preempt_block(const Request& req,
                                                                  int tokens) {
  if (!req.is_rt()) {
    throw ContractViolation("find_preempt_block expects an RT request");
  }
  AllocationPlan plan;
  plan.req = req.id;
  plan.cls = req.cls;
  plan.epoch = epoch_;
  plan.tokens = tokens;

  int remaining = tokens;
  auto take = [&](int b, int n, bool fresh) {
    add_rt(b, req.id, n, +1);
    add_segment(plan.writes, b, n, fresh);
    remaining -= n;
  };

  std::optional<int> last;
  if (auto it = kv_->requests_.find(req.id); it != kv_->requests_.end() && !it->second.blocks.empty()) {
    last = it->second.blocks.back();
  }

  // Free slots first: own tail, whole empty blocks, then the unused middle
  // of BE blocks with the most room.
  if (last && remaining > 0) {
    const int n = std::min(free_eff(*last), remaining);
    if (n > 0) {
      take(*last, n, false);
    }
  }
  while (remaining > 0 && !empty_.empty()) {
    take(*empty_.begin(), std::min(slots_, remaining), true);
  }
  std::vector<int> shared_now;
  if (bidirectional_) {
    while (remaining > 0 && !be_only_.empty()) {
      const auto [neg_free, b] = *be_only_.begin();
      if (neg_free >= 0) {
        break;
      }
      shared_now.push_back(b);
      take(b, std::min(-neg_free, remaining), false);
    }
  }

  // Then overwrite BE slots, checkpointing them lazily at commit.
  if (bidirectional_ && remaining > 0) {
    std::vector<int> order;
    if (last) {
      order.push_back(*last);
    }
    order.insert(order.end(), shared_now.begin(), shared_now.end());
    for (int b : order) {
      if (remaining == 0) {
        break;
      }
      const int n = std::min(slots_ - rt_eff(b), remaining);
      if (n > 0) {
        take(b, n, false);
      }
    }
    while (remaining > 0 && !be_only_.empty()) {
      const int b = be_only_.begin()->second;
      take(b, std::min(slots_ - rt_eff(b), remaining), false);
    }
  }

  if (remaining > 0) {
    unclaim(plan);
    return std::nullopt;
  }
  for (const auto& s : plan.writes) {
    plan.m_new += s.fresh ? 1 : 0;
  }
  return plan;
}

std::optional<AllocationPlan> PlanningSession::find_block(const Request& req, int tokens) {
  if (req.is_rt()) {
    throw ContractViolation("find_block expects a BE request");
  }
  AllocationPlan plan;
  plan.req = req.id;
  plan.cls = req.cls;
  plan.epoch = epoch_;
  plan.tokens = tokens;

  const auto it = kv_->requests_.find(req.id);
  int relocated = 0;
  if (it != kv_->requests_.end()) {
    for (int b : it->second.blocks) {
      const Block& blk = kv_->blocks_[b];
      const int base = slots_ - blk.be_used;
      const int covered = clamp_int(rt_eff(b) - base, 0, blk.be_used);
      if (std::max(blk.be_ckpt, covered) > 0) {
        ++plan.m_cpu;
      }
      if (covered > 0) {
        relocate_be(b, covered, +1);
        plan.relocations.emplace_back(b, covered);
        relocated += covered;
      }
    }
  }

  int remaining = tokens + relocated;
  auto take = [&](int b, int n, bool fresh) {
    add_be(b, req.id, n, +1);
    add_segment(plan.writes, b, n, fresh);
    remaining -= n;
  };

  if (it != kv_->requests_.end() && !it->second.blocks.empty()) {
    const int last = it->second.blocks.back();
    if (be_eff(last) > 0) {
      const int n = std::min(free_eff(last), remaining);
      if (n > 0) {
        take(last, n, false);
      }
    }
  }
  while (remaining > 0) {
    if (!empty_.empty()) {
      take(*empty_.begin(), std::min(slots_, remaining), true);
      continue;
    }
    if (bidirectional_ && !rt_only_.empty() && rt_only_.begin()->first < 0) {
      const auto [neg_free, b] = *rt_only_.begin();
      take(b, std::min(-neg_free, remaining), false);
      continue;
    }
    break;
  }

  if (remaining > 0) {
    unclaim(plan);
    return std::nullopt;
  }
  for (const auto& s : plan.writes) {
    plan.m_new += s.fresh ? 1 : 0;
  }
  return plan;
}

void PlanningSession::unclaim(const AllocationPlan& plan) {
  for (const auto& s : plan.writes) {
    if (plan.cls == RequestClass::kRealTime) {
      add_rt(s.block, plan.req, s.slots, -1);
    } else {
      add_be(s.block, plan.req, s.slots, -1);
    }
  }
  for (const auto& [b, n] : plan.relocations) {
    relocate_be(b, n, -1);
  }
}

void PlanningSession::claim(const AllocationPlan& plan) {
  for (const auto& [b, n] : plan.relocations) {
    relocate_be(b, n, +1);
  }
  for (const auto& s : plan.writes) {
    if (plan.cls == RequestClass::kRealTime) {
      add_rt(s.block, plan.req, s.slots, +1);
    } else {
      add_be(s.block, plan.req, s.slots, +1);
    }
  }
}

// ---------------------------------------------------------------------------
// KvManager

KvManager::KvManager(int num_blocks, int slots_per_block, bool bidirectional)
    : slots_(slots_per_block), bidirectional_(bidirectional) {
  if (num_blocks < 1 || slots_per_block < 1) {
    throw ContractViolation("block pool needs at least one block of one slot");
  }
  blocks_.resize(static_cast<std::size_t>(num_blocks));
  for (int i = 0; i < num_blocks; ++i) {
    blocks_[i].id = i;
    empty_.insert(i);
  }
}

KvManager::Category KvManager::category(const Block& b) const {
  if (!b.rt_owner && !b.be_owner) {
    return Category::kEmpty;
  }
  if (b.be_owner && !b.rt_owner) {
    return Category::kBeOnly;
  }
  if (b.rt_owner && !b.be_owner) {
    return Category::kRtOnly;
  }
  return Category::kShared;
}

void KvManager::unindex(int b) {
  const Block& blk = blocks_[b];
  const int free = std::max(0, slots_ - blk.rt_used - blk.be_used);
  switch (category(blk)) {
    case Category::kEmpty:
      empty_.erase(b);
      break;
    case Category::kBeOnly:
      be_only_.erase({-free, b});
      break;
    case Category::kRtOnly:
      rt_only_.erase({-free, b});
      break;
    case Category::kShared:
      break;
  }
}

void KvManager::index(int b) {
  const Block& blk = blocks_[b];
  const int free = std::max(0, slots_ - blk.rt_used - blk.be_used);
  switch (category(blk)) {
    case Category::kEmpty:
      empty_.insert(b);
      break;
    case Category::kBeOnly:
      be_only_.insert({-free, b});
      break;
    case Category::kRtOnly:
      rt_only_.insert({-free, b});
      break;
    case Category::kShared:
      break;
  }
}

void KvManager::sync_entry(int b) {
  const Block& blk = blocks_[b];
  if (blk.be_ckpt == 0) {
    table_.erase(b);
    return;
  }
  auto [it, inserted] = table_.try_emplace(b);
  PreemptionEntry& e = it->second;
  if (inserted) {
    e.host_handle = next_handle_++;
  }
  e.block = b;
  e.rt_req = blk.rt_owner;
  e.be_req = *blk.be_owner;
  e.slot_begin = slots_ - blk.be_used;
  e.slot_count = blk.be_ckpt;
}

std::vector<int> KvManager::blocks_of(RequestId id) const {
  const auto it = requests_.find(id);
  return it == requests_.end() ? std::vector<int>{} : it->second.blocks;
}

int KvManager::footprint(RequestId id) const {
  const auto it = requests_.find(id);
  return it == requests_.end() ? 0 : static_cast<int>(it->second.blocks.size());
}

std::int64_t KvManager::stored_tokens(RequestId id) const {
  const auto it = requests_.find(id);
  if (it == requests_.end()) {
    return 0;
  }
  std::int64_t total = 0;
  for (int b : it->second.blocks) {
    total += it->second.cls == RequestClass::kRealTime ? blocks_[b].rt_used : blocks_[b].be_used;
  }
  return total;
}

int KvManager::swap_in_plan(RequestId id) const {
  const auto it = requests_.find(id);
  if (it == requests_.end() || it->second.cls == RequestClass::kRealTime) {
    return 0;
  }
  int n = 0;
  for (int b : it->second.blocks) {
    n += blocks_[b].be_ckpt > 0 ? 1 : 0;
  }
  return n;
}

int KvManager::usable_blocks_for_rt() const {
  return empty_blocks() + (bidirectional_ ? be_only_blocks() : 0);
}

void KvManager::validate(const AllocationPlan& plan) const {
  if (plan.epoch != epoch_) {
    throw StalePlan(fmt::format("plan for request {} was made at epoch {}, pool is at {}",
                                plan.req, plan.epoch, epoch_));
  }
}

std::vector<KvAction> KvManager::commit(std::span<const AllocationPlan> plans) {
  std::set<RequestId> seen;
  for (const auto& p : plans) {
    validate(p);
    if (!seen.insert(p.req).second) {
      throw StalePlan(fmt::format("request {} has two plans in one commit", p.req));
    }
  }
  std::vector<KvAction> out;
  for (const auto& p : plans) {
    if (p.cls == RequestClass::kRealTime) {
      commit_rt(p, out);
    }
  }
  for (const auto& p : plans) {
    if (p.cls == RequestClass::kBestEffort) {
      commit_be(p, out);
    }
  }
  ++epoch_;
  return out;
}

void KvManager::commit_rt(const AllocationPlan& plan, std::vector<KvAction>& out) {
  auto& rk = requests_[plan.req];
  if (rk.blocks.empty()) {
    rk.cls = RequestClass::kRealTime;
  } else if (rk.cls != RequestClass::kRealTime) {
    throw StalePlan(fmt::format("request {} is not an RT request", plan.req));
  }
  for (const auto& seg : plan.writes) {
    Block& blk = blocks_.at(static_cast<std::size_t>(seg.block));
    if (seg.fresh && !blk.empty()) {
      throw StalePlan(fmt::format("block {} is no longer empty", seg.block));
    }
    if (blk.rt_owner && *blk.rt_owner != plan.req) {
      throw StalePlan(fmt::format("block {} belongs to RT request {}", seg.block, *blk.rt_owner));
    }
    const int capacity = bidirectional_ ? slots_ - blk.rt_used
                                        : (blk.be_owner ? 0 : slots_ - blk.rt_used);
    if (seg.slots > capacity) {
      throw StalePlan(fmt::format("block {} cannot take {} RT slots", seg.block, seg.slots));
    }
    unindex(seg.block);
    for (int k = 0; k < seg.slots; ++k) {
      const int s = blk.rt_used + k;
      const int base = slots_ - blk.be_used;
      if (blk.be_used > 0 && s >= base && s - base >= blk.be_ckpt) {
        out.push_back({KvActionKind::kCheckpoint, *blk.be_owner, seg.block, s});
        blk.be_ckpt = s - base + 1;
      }
      out.push_back({KvActionKind::kWrite, plan.req, seg.block, s});
    }
    blk.rt_used += seg.slots;
    if (!blk.rt_owner) {
      blk.rt_owner = plan.req;
      rk.blocks.push_back(seg.block);
    }
    index(seg.block);
    sync_entry(seg.block);
  }
  if (rk.blocks.empty()) {
    requests_.erase(plan.req);
  }
}

void KvManager::commit_be(const AllocationPlan& plan, std::vector<KvAction>& out) {
  auto& rk = requests_[plan.req];
  if (rk.blocks.empty()) {
    rk.cls = RequestClass::kBestEffort;
  } else if (rk.cls != RequestClass::kBestEffort) {
    throw StalePlan(fmt::format("request {} is not a BE request", plan.req));
  }

  // Checkpointed slots now sitting under RT data move elsewhere.
  std::vector<std::pair<int, int>> sources;
  for (const auto& [b, n] : plan.relocations) {
    Block& blk = blocks_.at(static_cast<std::size_t>(b));
    if (!blk.be_owner || *blk.be_owner != plan.req) {
      throw StalePlan(fmt::format("block {} is not held by BE request {}", b, plan.req));
    }
    const int base = slots_ - blk.be_used;
    const int covered = clamp_int(blk.rt_used - base, 0, blk.be_used);
    if (n > blk.be_ckpt || covered > n) {
      throw StalePlan(fmt::format("relocation of {} slots in block {} no longer matches", n, b));
    }
    for (int k = 0; k < n; ++k) {
      sources.emplace_back(b, base + k);
    }
    unindex(b);
    blk.be_used -= n;
    blk.be_ckpt -= n;
    if (blk.be_used == 0) {
      blk.be_owner.reset();
      std::erase(rk.blocks, b);
    }
    index(b);
    sync_entry(b);
  }

  // The rest of the checkpointed slots go back where they were.
  for (int b : rk.blocks) {
    Block& blk = blocks_[b];
    if (blk.be_ckpt == 0) {
      continue;
    }
    const int base = slots_ - blk.be_used;
    if (blk.rt_used > base) {
      throw StalePlan(fmt::format("block {} still covers checkpointed slots", b));
    }
    for (int k = 0; k < blk.be_ckpt; ++k) {
      out.push_back({KvActionKind::kRestore, plan.req, b, base + k});
    }
    blk.be_ckpt = 0;
    sync_entry(b);
  }

  std::size_t next_source = 0;
  int written = 0;
  for (const auto& seg : plan.writes) {
    Block& blk = blocks_.at(static_cast<std::size_t>(seg.block));
    if (seg.fresh && !blk.empty()) {
      throw StalePlan(fmt::format("block {} is no longer empty", seg.block));
    }
    if (blk.be_owner && *blk.be_owner != plan.req) {
      throw StalePlan(fmt::format("block {} belongs to BE request {}", seg.block, *blk.be_owner));
    }
    if (!bidirectional_ && blk.rt_owner) {
      throw StalePlan(fmt::format("block {} is RT-owned and sharing is disabled", seg.block));
    }
    if (seg.slots > slots_ - blk.rt_used - blk.be_used) {
      throw StalePlan(fmt::format("block {} cannot take {} BE slots", seg.block, seg.slots));
    }
    unindex(seg.block);
    for (int k = 0; k < seg.slots; ++k) {
      const int s = slots_ - blk.be_used - 1 - k;
      if (next_source < sources.size()) {
        const auto [fb, fs] = sources[next_source++];
        out.push_back({KvActionKind::kRelocate, plan.req, fb, fs, seg.block, s});
      } else {
        out.push_back({KvActionKind::kWrite, plan.req, seg.block, s});
      }
    }
    blk.be_used += seg.slots;
    written += seg.slots;
    if (!blk.be_owner) {
      blk.be_owner = plan.req;
      rk.blocks.push_back(seg.block);
    }
    index(seg.block);
  }
  if (next_source != sources.size() ||
      written != plan.tokens + static_cast<int>(sources.size())) {
    throw StalePlan(fmt::format("plan for BE request {} does not cover its tokens", plan.req));
  }
  if (rk.blocks.empty()) {
    requests_.erase(plan.req);
  }
}

std::vector<KvAction> KvManager::release(RequestId id) {
  const auto it = requests_.find(id);
  if (it == requests_.end()) {
    return {};
  }
  const bool rt = it->second.cls == RequestClass::kRealTime;
  for (int b : it->second.blocks) {
    Block& blk = blocks_[b];
    unindex(b);
    if (rt) {
      blk.rt_used = 0;
      blk.rt_owner.reset();
    } else {
      blk.be_used = 0;
      blk.be_ckpt = 0;
      blk.be_owner.reset();
    }
    index(b);
    sync_entry(b);
  }
  requests_.erase(it);
  ++epoch_;
  return {KvAction{KvActionKind::kFree, id}};
}

int KvManager::usable_gain(RequestId id) const {
  const auto it = requests_.find(id);
  if (it == requests_.end()) {
    return 0;
  }
  int gain = 0;
  for (int b : it->second.blocks) {
    const Block& blk = blocks_[b];
    if (it->second.cls == RequestClass::kRealTime) {
      // RT-only becomes empty; shared becomes BE-only, usable only with sharing.
      gain += (!blk.be_owner || bidirectional_) ? 1 : 0;
    } else if (!blk.rt_owner && !bidirectional_) {
      gain += 1;  // BE-only is already usable when sharing is enabled
    }
  }
  return gain;
}

std::vector<RequestId> KvManager::drop_victims(int needed_blocks, const RequestTable& requests,
                                               RequestId protect, const SloConfig& slo,
                                               Micros t_avg, std::vector<KvAction>* actions) {
  std::vector<RequestId> be, rt;
  for (const auto& [id, rk] : requests_) {
    if (id == protect) {
      continue;
    }
    (rk.cls == RequestClass::kRealTime ? rt : be).push_back(id);
  }
  std::sort(be.begin(), be.end(), [&](RequestId a, RequestId b) {
    const int fa = footprint(a), fb = footprint(b);
    return fa != fb ? fa > fb : a < b;
  });
  std::sort(rt.begin(), rt.end(), [&](RequestId a, RequestId b) {
    return priority_key(requests.at(static_cast<std::size_t>(b)), slo, t_avg) <
           priority_key(requests.at(static_cast<std::size_t>(a)), slo, t_avg);
  });

  std::vector<RequestId> order = be;
  order.insert(order.end(), rt.begin(), rt.end());
  std::vector<RequestId> dropped;
  for (RequestId v : order) {
    if (usable_blocks_for_rt() >= needed_blocks) {
      break;
    }
    if (usable_gain(v) <= 0) {
      continue;
    }
    auto freed = release(v);
    if (actions) {
      actions->insert(actions->end(), freed.begin(), freed.end());
    }
    dropped.push_back(v);
  }
  if (usable_blocks_for_rt() < needed_blocks) {
    throw PoolExhausted(fmt::format(
        "need {} usable blocks but only {} remain after dropping {} requests (pool of {})",
        needed_blocks, usable_blocks_for_rt(), dropped.size(), num_blocks()));
  }
  return dropped;
}

void KvManager::check_invariants() const {
  auto fail = [](const std::string& msg) { throw ConsistencyError("kv pool: " + msg); };
  std::size_t n_empty = 0, n_be = 0, n_rt = 0;
  for (const auto& blk : blocks_) {
    const int b = blk.id;
    if ((blk.rt_used > 0) != blk.rt_owner.has_value()) {
      fail(fmt::format("block {} RT usage/owner mismatch", b));
    }
    if ((blk.be_used > 0) != blk.be_owner.has_value()) {
      fail(fmt::format("block {} BE usage/owner mismatch", b));
    }
    if (blk.be_ckpt < 0 || blk.be_ckpt > blk.be_used || blk.rt_used > slots_ ||
        blk.be_used > slots_) {
      fail(fmt::format("block {} counters out of range", b));
    }
    if (blk.rt_used > slots_ - blk.be_used + blk.be_ckpt) {
      fail(fmt::format("block {} RT overlaps live BE slots", b));
    }
    if (!bidirectional_ && blk.rt_owner && blk.be_owner) {
      fail(fmt::format("block {} shared with sharing disabled", b));
    }
    const int free = std::max(0, slots_ - blk.rt_used - blk.be_used);
    switch (category(blk)) {
      case Category::kEmpty:
        ++n_empty;
        if (!empty_.count(b)) fail(fmt::format("block {} missing from empty index", b));
        break;
      case Category::kBeOnly:
        ++n_be;
        if (!be_only_.count({-free, b})) fail(fmt::format("block {} missing from BE index", b));
        break;
      case Category::kRtOnly:
        ++n_rt;
        if (!rt_only_.count({-free, b})) fail(fmt::format("block {} missing from RT index", b));
        break;
      case Category::kShared:
        break;
    }
    const bool has_entry = table_.count(b) != 0;
    if (has_entry != (blk.be_ckpt > 0)) {
      fail(fmt::format("block {} preemption entry mismatch", b));
    }
    if (has_entry) {
      const auto& e = table_.at(b);
      if (e.be_req != *blk.be_owner || e.rt_req != blk.rt_owner || e.slot_count != blk.be_ckpt ||
          e.slot_begin != slots_ - blk.be_used) {
        fail(fmt::format("block {} preemption entry is stale", b));
      }
    }
  }
  if (n_empty != empty_.size() || n_be != be_only_.size() || n_rt != rt_only_.size()) {
    fail("index sizes disagree with blocks");
  }
  for (const auto& [id, rk] : requests_) {
    if (rk.blocks.empty()) {
      fail(fmt::format("request {} tracked without blocks", id));
    }
    for (int b : rk.blocks) {
      const auto& owner = rk.cls == RequestClass::kRealTime ? blocks_[b].rt_owner
                                                             : blocks_[b].be_owner;
      if (!owner || *owner != id) {
        fail(fmt::format("request {} lists block {} it does not own", id, b));
      }
    }
  }
  for (const auto& blk : blocks_) {
    for (const auto& owner : {blk.rt_owner, blk.be_owner}) {
      if (owner) {
        const auto it = requests_.find(*owner);
        if (it == requests_.end() ||
            std::find(it->second.blocks.begin(), it->second.blocks.end(), blk.id) ==
                it->second.blocks.end()) {
          fail(fmt::format("block {} owner {} does not list it", blk.id, *owner));
        }
      }
    }
  }
}

std::string KvManager::snapshot_json() const {
  nlohmann::ordered_json blocks = nlohmann::ordered_json::array();
  for (const auto& blk : blocks_) {
    if (blk.empty()) {
      continue;
    }
    nlohmann::ordered_json j;
    j["id"] = blk.id;
    j["rt_owner"] = blk.rt_owner ? nlohmann::ordered_json(*blk.rt_owner) : nullptr;
    j["be_owner"] = blk.be_owner ? nlohmann::ordered_json(*blk.be_owner) : nullptr;
    j["rt_used"] = blk.rt_used;
    j["be_used"] = blk.be_used;
    j["be_checkpointed"] = blk.be_ckpt;
    blocks.push_back(std::move(j));
  }
  nlohmann::ordered_json table = nlohmann::ordered_json::array();
  for (const auto& [b, e] : table_) {
    table.push_back({{"block", b},
                     {"rt_req", e.rt_req ? nlohmann::ordered_json(*e.rt_req) : nullptr},
                     {"be_req", e.be_req},
                     {"slot_begin", e.slot_begin},
                     {"slot_count", e.slot_count},
                     {"host_handle", e.host_handle}});
  }
  nlohmann::ordered_json out;
  out["num_blocks"] = num_blocks();
  out["slots_per_block"] = slots_;
  out["empty_blocks"] = empty_blocks();
  out["blocks"] = std::move(blocks);
  out["preemption_table"] = std::move(table);
  return out.dump(2);
}

}  // namespace rtbe
