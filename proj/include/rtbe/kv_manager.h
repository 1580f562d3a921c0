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
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rtbe/core.h"

namespace rtbe {

// One KV block. RT slots fill [0, rt_used) from the left, BE slots fill
// [S - be_used, S) from the right. The leftmost `be_ckpt` slots of the BE
// region have their contents in the host store; where rt_used reaches into
// that range the RT request physically occupies them.
struct Block {
  int id = 0;
  std::optional<RequestId> rt_owner;
  std::optional<RequestId> be_owner;
  int rt_used = 0;
  int be_used = 0;
  int be_ckpt = 0;

  bool empty() const { return !rt_owner && !be_owner; }
};

// Present for every block holding checkpointed BE slots. rt_req is unset
// once the preempting RT request has released the block.
struct PreemptionEntry {
  int block = 0;
  std::optional<RequestId> rt_req;
  RequestId be_req = 0;
  int slot_begin = 0;  // first checkpointed slot index within the block
  int slot_count = 0;
  std::int64_t host_handle = 0;
};

enum class KvActionKind {
  kWrite,       // store a newly processed token of `req` at (block, slot)
  kCheckpoint,  // copy the BE token at (block, slot) to the host store
  kRestore,     // copy host (block, slot) back to the same position
  kRelocate,    // copy host (block, slot) to (to_block, to_slot)
  kFree,        // discard every slot and host copy of `req`
};

struct KvAction {
  KvActionKind kind = KvActionKind::kWrite;
  RequestId req = 0;
  int block = -1;
  int slot = -1;
  int to_block = -1;
  int to_slot = -1;
};

struct PlanSegment {
  int block = 0;
  int slots = 0;
  bool fresh = false;  // block was empty when planned
};

// Result of find_block / find_preempt_block. Nothing is reserved in the pool
// until the plan is committed.
struct AllocationPlan {
  RequestId req = 0;
  RequestClass cls = RequestClass::kRealTime;
  std::uint64_t epoch = 0;
  int tokens = 0;
  std::vector<PlanSegment> writes;
  // BE only: checkpointed slots whose home position is covered by RT data
  // and must be restored somewhere else, as (block, count).
  std::vector<std::pair<int, int>> relocations;
  int m_new = 0;  // empty blocks taken
  int m_cpu = 0;  // blocks with checkpointed slots to bring back
};

class KvManager;

// Planning overlay for one scheduling pass. Plans claim capacity inside the
// session so later plans see earlier ones; the pool itself is untouched
// until KvManager::commit.
class PlanningSession {
 public:
  explicit PlanningSession(const KvManager& kv);

  // Plan storage for `tokens` new KV entries of a BE request.
  std::optional<AllocationPlan> find_block(const Request& req, int tokens);
  // Plan storage for an RT request, preempting BE blocks if needed.
  std::optional<AllocationPlan> find_preempt_block(const Request& req, int tokens);

  // Reverses the claims of a plan produced by this session.
  void unclaim(const AllocationPlan& plan);
  // Reapplies a plan previously unclaimed in this session.
  void claim(const AllocationPlan& plan);

  // Empty blocks left after the claims made so far.
  int empty_blocks() const { return static_cast<int>(empty_.size()); }
  int initial_empty_blocks() const { return initial_empty_; }

 private:
  using FreeKey = std::pair<int, int>;  // (-free slots, block id)

  std::optional<RequestId> rt_owner(int b) const;
  std::optional<RequestId> be_owner(int b) const;
  int rt_eff(int b) const;
  int be_eff(int b) const;
  int free_eff(int b) const;
  void unindex(int b);
  void index(int b);
  void add_rt(int b, RequestId req, int slots, int sign);
  void add_be(int b, RequestId req, int slots, int sign);
  void relocate_be(int b, int slots, int sign);

  const KvManager* kv_;
  std::uint64_t epoch_;
  int slots_;
  bool bidirectional_;
  int initial_empty_ = 0;
  std::vector<RequestId> rt_claim_;
  std::vector<int> rt_add_;
  std::vector<RequestId> be_claim_;
  std::vector<int> be_add_;
  std::vector<int> be_reloc_;
  std::set<int> empty_;
  std::set<FreeKey> be_only_;
  std::set<FreeKey> rt_only_;
};

class KvManager {
 public:
  // With `bidirectional` false, RT and BE never share a block and RT
  // requests cannot take space from BE blocks.
  KvManager(int num_blocks, int slots_per_block = 16, bool bidirectional = true);

  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  int slots_per_block() const { return slots_; }
  bool bidirectional() const { return bidirectional_; }
  std::uint64_t epoch() const { return epoch_; }

  int empty_blocks() const { return static_cast<int>(empty_.size()); }
  int be_only_blocks() const { return static_cast<int>(be_only_.size()); }
  const Block& block(int id) const { return blocks_.at(static_cast<std::size_t>(id)); }
  const std::map<int, PreemptionEntry>& preemption_table() const { return table_; }

  bool holds(RequestId id) const { return requests_.count(id) != 0; }
  std::vector<int> blocks_of(RequestId id) const;
  // Blocks touched by the request.
  int footprint(RequestId id) const;
  // KV entries recorded for the request, on device or checkpointed.
  std::int64_t stored_tokens(RequestId id) const;
  // Blocks holding checkpointed slots of the request.
  int swap_in_plan(RequestId id) const;

  PlanningSession begin_session() const { return PlanningSession(*this); }

  // Applies every plan of one iteration, RT plans before BE plans, and
  // returns the slot-level actions. Throws StalePlan if any plan was made
  // against a different pool state.
  std::vector<KvAction> commit(std::span<const AllocationPlan> plans);

  // Frees everything the request holds. Checkpointed peer slots stay
  // checkpointed. Returns the emitted kFree action (empty if nothing held).
  std::vector<KvAction> release(RequestId id);

  // Drops requests until `needed_blocks` blocks are usable by an RT request
  // (empty, or BE-only when sharing is enabled). BE requests go first,
  // largest footprint first, then RT requests by descending remaining time.
  // Only victims whose removal frees usable blocks are dropped. `protect`
  // is never chosen. Throws PoolExhausted if the target cannot be reached.
  std::vector<RequestId> drop_victims(int needed_blocks, const RequestTable& requests,
                                      RequestId protect, const SloConfig& slo, Micros t_avg,
                                      std::vector<KvAction>* actions = nullptr);

  int usable_blocks_for_rt() const;
  // Blocks needed to hold `tokens` from scratch.
  int blocks_for(int tokens) const { return (tokens + slots_ - 1) / slots_; }

  // Throws ConsistencyError if indices, ownership or the preemption table
  // disagree with block contents.
  void check_invariants() const;

  std::string snapshot_json() const;

 private:
  friend class PlanningSession;
  using FreeKey = std::pair<int, int>;

  struct RequestKv {
    RequestClass cls = RequestClass::kRealTime;
    std::vector<int> blocks;
  };

  enum class Category { kEmpty, kBeOnly, kRtOnly, kShared };

  Category category(const Block& b) const;
  void unindex(int b);
  void index(int b);
  void sync_entry(int b);
  void commit_rt(const AllocationPlan& plan, std::vector<KvAction>& out);
  void commit_be(const AllocationPlan& plan, std::vector<KvAction>& out);
  void validate(const AllocationPlan& plan) const;
  int usable_gain(RequestId id) const;

  int slots_;
  bool bidirectional_;
  std::uint64_t epoch_ = 1;
  std::int64_t next_handle_ = 1;
  std::vector<Block> blocks_;
  std::unordered_map<RequestId, RequestKv> requests_;
  std::map<int, PreemptionEntry> table_;
  std::set<int> empty_;
  std::set<FreeKey> be_only_;
  std::set<FreeKey> rt_only_;
};

}  // namespace rtbe
