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

// Acceptance suite. Prints one PASS/FAIL line per criterion followed by the
// measurements behind it, and exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <tuple>
#include <random>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <fmt/format.h>

#include "fixtures.h"
#include "kv_reference.h"
#include "micro_traces.h"
#include "rtbe/config.h"
#include "rtbe/cost_model.h"
#include "rtbe/errors.h"
#include "rtbe/experiment.h"
#include "rtbe/kv_manager.h"
#include "rtbe/metrics.h"
#include "rtbe/oracle.h"
#include "rtbe/scheduler.h"
#include "rtbe/sim_engine.h"
#include "rtbe/workload.h"

namespace rtbe {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::vector<std::string> notes;
  void note(std::string s) { notes.push_back(std::move(s)); }
};

// Shared between criteria so the expensive runs happen once.
struct Shared {
  ExperimentConfig cfg;
  std::vector<CellSummary> sweep;
  std::optional<EventLog> packing_log;  // packing at the middle rate
  Trace packing_trace;
};

int jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

const CellSummary& cell(const Shared& s, SchedulerKind kind, double rate) {
  for (const auto& c : s.sweep) {
    if (c.kind == kind && c.rate == rate) {
      return c;
    }
  }
  throw Error(fmt::format("no cell for {} at rate {}", to_string(kind), rate));
}

// --- AC1 -------------------------------------------------------------------

Outcome ac1_feasibility(Shared& s) {
  Outcome o;
  const double rate = s.cfg.rates[s.cfg.rates.size() / 2];
  s.packing_trace = generate_trace(s.cfg.workload_for(rate));
  const SimConfig sc = s.cfg.sim_config(SchedulerKind::kPacking);

  const auto t0 = Clock::now();
  Simulator sim(sc, s.packing_trace);
  std::unordered_map<RequestId, BatchEntry> queued;
  std::vector<bool> seen(s.packing_trace.entries.size(), false);
  std::int64_t cap_bad = 0, mem_bad = 0, guard_bad = 0, cost_bad = 0, foreign = 0;
  std::int64_t with_rt = 0, degenerate = 0;
  for (;;) {
    queued.clear();
    const auto& q = sim.queues();
    for (const auto* v : {&q.rt_waiting, &q.rt_pending, &q.be_waiting, &q.be_pending}) {
      for (RequestId id : *v) {
        queued.emplace(id, batch_entry_for(sim.requests()[id]));
        seen[static_cast<std::size_t>(id)] = true;
      }
    }
    const auto before = sim.log().records.size();
    const bool more = sim.step();
    if (sim.log().records.size() > before) {
      const auto& r = sim.log().records.back();
      const int size = static_cast<int>(r.rt_ids.size() + r.be_ids.size());
      cap_bad += size > r.b_curr;
      mem_bad += r.m_new_total > r.empty_blocks;
      if (!r.rt_ids.empty()) {
        ++with_rt;
        if (r.degenerate) {
          ++degenerate;
        } else {
          guard_bad += r.estimated > r.t_min_res;
        }
      }
      // Recompute the batch cost from the request state seen before the step.
      std::vector<BatchEntry> entries;
      for (const auto* ids : {&r.rt_ids, &r.be_ids}) {
        for (RequestId id : *ids) {
          const auto it = queued.find(id);
          if (it != queued.end()) {
            entries.push_back(it->second);
            continue;
          }
          // Released by this very step, so never queued before: a fresh
          // prefill of the trace prompt.
          const auto& rel = sim.log().release_times;
          const auto idx = static_cast<std::size_t>(id);
          if (idx < rel.size() && !seen[idx] && rel[idx] >= 0 && rel[idx] <= r.start) {
            const int p = s.packing_trace.entries[idx].prompt_len;
            entries.push_back({ExecPhase::kPrefill, p, p});
          } else {
            ++foreign;
          }
        }
      }
      cost_bad += predict_iteration(entries, r.swap_blocks, sc.models) != r.estimated;
    }
    if (!more) {
      break;
    }
  }
  const double secs = seconds_since(t0);
  const auto n = static_cast<std::int64_t>(sim.log().records.size());
  s.packing_log = sim.take_log();

  o.pass = n >= 5000 && cap_bad == 0 && mem_bad == 0 && guard_bad == 0 && cost_bad == 0 &&
           foreign == 0 && secs < 60.0;
  o.note(fmt::format("packing, rate {}/s, {} s horizon: {} iterations in {:.1f} s", rate,
                     s.cfg.horizon_s, n, secs));
  o.note(fmt::format("cap violations {}, memory violations {}, unqueued requests {}", cap_bad,
                     mem_bad, foreign));
  o.note(fmt::format("decisions with RT {}: guard violations {}, solo degenerate {}", with_rt,
                     guard_bad, degenerate));
  o.note(fmt::format("estimate mismatches against independent recomputation: {}", cost_bad));
  return o;
}

// --- AC2 -------------------------------------------------------------------

struct SmallState {
  RequestTable requests;
  QueueSet queues;
  KvManager kv{1, 16};
  SchedulerState state;
};

SmallState random_state(std::mt19937_64& rng, const SloConfig& slo) {
  auto pick = [&](int lo, int hi) {
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  };
  SmallState st;
  const int blocks = pick(2, 16);
  st.kv = KvManager(blocks, 16, true);
  st.state.b_curr = pick(1, 6);
  st.state.t_avg = pick(0, 60'000);
  const int n_rt = pick(0, 6);
  const int n_be = pick(0, 6);
  for (int i = 0; i < n_rt + n_be; ++i) {
    const auto cls = i < n_rt ? RequestClass::kRealTime : RequestClass::kBestEffort;
    // Every request must fit the pool on its own.
    Request r = make_request(i, cls, pick(0, 1000), pick(1, std::min(120, blocks * 16 - 1)),
                             pick(2, 40), slo);
    bool running = pick(0, 1) == 1;
    if (running) {
      auto session = st.kv.begin_session();
      auto plan = r.is_rt() ? session.find_preempt_block(r, r.prompt_len)
                            : session.find_block(r, r.prompt_len);
      if (plan) {
        std::vector<AllocationPlan> plans{*plan};
        st.kv.commit(plans);
        r.generated = 1;
        r.context_len = r.prompt_len + 1;
        r.needs_prefill = false;
        r.phase = Phase::kPending;
        if (r.is_rt()) {
          r.group_first_token = 1;
          r.group_start = r.arrival_time;
        }
      } else {
        running = false;
      }
    }
    if (r.is_rt()) {
      const Micros target = group_slo_target(r, slo);
      r.group_elapsed = pick(0, static_cast<int>(target));
    }
    st.requests.push_back(r);
  }
  // Arrival order within each waiting queue is what the queue set expects.
  std::vector<RequestId> order(st.requests.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](RequestId a, RequestId b) {
    return std::tie(st.requests[a].arrival_time, a) < std::tie(st.requests[b].arrival_time, b);
  });
  for (RequestId id : order) {
    const auto& r = st.requests[id];
    if (r.needs_prefill) {
      st.queues.enqueue_waiting(r);
    } else {
      st.queues.enqueue_pending(r);
    }
  }
  return st;
}

Outcome ac2_oracle(const Shared& s) {
  Outcome o;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(s.cfg.seed * 7919 + 2);
  const SloConfig slo = s.cfg.slo;
  const CostModels models = s.cfg.models;
  // The oracle's residual guard is the plain minimum, so packing runs with
  // the overload policies off to be judged on the same terms.
  const PackingPolicy policy{false, false};
  int cap_fail = 0, mem_fail = 0, guard_fail = 0;
  int checked = 0, infeasible = 0, negative_gap = 0, degenerate = 0, dropped = 0, strict_fail = 0;
  long gap_sum = 0;
  int max_gap = 0;
  std::uint64_t subsets = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    SmallState st = random_state(rng, slo);
    OracleInstance inst = make_oracle_instance(st.requests, st.queues, st.kv, models, slo,
                                               st.state.t_avg, st.state.b_curr);
    SchedContext ctx{st.requests, st.queues, st.kv, models, slo};
    const ScheduleDecision d = schedule_packing(ctx, st.state, policy);
    if (!d.dropped.empty()) {
      // Victims were dropped before packing, so the batch was chosen on the
      // pool left afterwards; judge it on that state.
      ++dropped;
      inst = make_oracle_instance(st.requests, st.queues, st.kv, models, slo, st.state.t_avg,
                                  st.state.b_curr);
    }
    if (d.degenerate) {
      ++degenerate;
      continue;
    }
    ++checked;
    std::vector<RequestId> sel = d.rt_ready;
    sel.insert(sel.end(), d.be_ready.begin(), d.be_ready.end());
    const SelectionCheck chk = check_selection(inst, sel, DeadlineForm::kResidualGuard);
    if (!chk.ok()) {
      ++infeasible;
      cap_fail += !chk.cap_ok;
      mem_fail += !chk.memory_ok;
      guard_fail += !chk.deadline_ok;
    }
    if (!check_selection(inst, sel, DeadlineForm::kStrict).ok()) {
      ++strict_fail;
    }
    const OracleResult best = oracle_pack(inst, DeadlineForm::kResidualGuard);
    subsets += best.subsets_checked;
    const int gap = best.best_be - static_cast<int>(d.be_ready.size());
    negative_gap += gap < 0;
    gap_sum += gap;
    max_gap = std::max(max_gap, gap);
  }
  const double secs = seconds_since(t0);
  const double mean_gap = checked ? static_cast<double>(gap_sum) / checked : 0.0;
  o.pass = checked > 0 && infeasible == 0 && negative_gap == 0 && mean_gap <= 1.0 && secs < 120.0;
  o.note(fmt::format("1000 instances: {} compared ({} after victim drops), {} solo degenerate",
                     checked, dropped, degenerate));
  o.note(fmt::format("infeasible under the residual-guard checker: {} (cap {}, memory {}, "
                     "deadline {}); negative gaps: {}",
                     infeasible, cap_fail, mem_fail, guard_fail, negative_gap));
  o.note(fmt::format("BE optimality gap mean {:.3f}, max {}; {} subsets enumerated", mean_gap,
                     max_gap, subsets));
  o.note(fmt::format("decisions violating the per-request strict deadline form: {} ({:.1f}%)",
                     strict_fail, checked ? 100.0 * strict_fail / checked : 0.0));
  o.note(fmt::format("runtime {:.1f} s", secs));
  return o;
}

// --- AC3 / AC4 -------------------------------------------------------------

Outcome ac3_tradeoff(Shared& s) {
  Outcome o;
  const auto t0 = Clock::now();
  SweepOptions opts;
  opts.jobs = jobs();
  s.sweep = run_sweep(s.cfg, opts);
  o.note(fmt::format("sweep of {} cells in {:.1f} s", s.sweep.size(), seconds_since(t0)));
  for (const auto& line : [&] {
         std::vector<std::string> v;
         std::string t = comparison_table(s.sweep);
         std::size_t pos = 0;
         while (pos < t.size()) {
           const auto nl = t.find('\n', pos);
           v.push_back(t.substr(pos, nl - pos));
           pos = nl == std::string::npos ? t.size() : nl + 1;
         }
         return v;
       }()) {
    o.note(line);
  }
  bool ok = true;
  for (double rate : s.cfg.rates) {
    const auto& p = cell(s, SchedulerKind::kPacking, rate).metrics;
    const auto& f = cell(s, SchedulerKind::kFcfs, rate).metrics;
    const double lat = f.mean_normalized_latency > 0
                           ? p.mean_normalized_latency / f.mean_normalized_latency
                           : 0.0;
    const double thr = f.be_throughput_rps > 0 ? p.be_throughput_rps / f.be_throughput_rps : 1.0;
    const bool good = lat <= 0.6 && thr >= 0.75;
    ok = ok && good;
    o.note(fmt::format("rate {}: latency packing/fcfs {:.3f} (<= 0.6), BE throughput {:.3f} "
                       "(>= 0.75) {}",
                       rate, lat, thr, good ? "ok" : "MISS"));
  }
  const double top = s.cfg.rates.back();
  const auto& p = cell(s, SchedulerKind::kPacking, top).metrics;
  const auto& r = cell(s, SchedulerKind::kRoundRobin, top).metrics;
  const bool vs_rr = p.mean_normalized_latency < r.mean_normalized_latency &&
                     p.be_throughput_rps >= r.be_throughput_rps;
  o.note(fmt::format("rate {} vs rr: latency {:.0f} vs {:.0f} us/token, BE {:.2f} vs {:.2f} req/s {}",
                     top, p.mean_normalized_latency, r.mean_normalized_latency,
                     p.be_throughput_rps, r.be_throughput_rps, vs_rr ? "ok" : "MISS"));
  o.pass = ok && vs_rr;
  return o;
}

Outcome ac4_attainment(const Shared& s) {
  Outcome o;
  int strict = 0;
  bool top_ok = false;
  for (double rate : s.cfg.rates) {
    const double p = cell(s, SchedulerKind::kPacking, rate).metrics.ttft_attainment;
    const double r = cell(s, SchedulerKind::kRoundRobin, rate).metrics.ttft_attainment;
    const double f = cell(s, SchedulerKind::kFcfs, rate).metrics.ttft_attainment;
    const bool ordered = p > r && r > f;
    strict += ordered;
    if (rate == s.cfg.rates.back()) {
      top_ok = ordered;
    }
    o.note(fmt::format("rate {}: TTFT attainment packing {:.4f} > rr {:.4f} > fcfs {:.4f} {}", rate,
                       p, r, f, ordered ? "ok" : "not strict"));
  }
  o.pass = strict >= 2;
  o.note(fmt::format("strict ordering at {} of {} rates (needs 2); highest rate {}", strict,
                     s.cfg.rates.size(), top_ok ? "ordered" : "not ordered"));
  return o;
}

// --- AC5 -------------------------------------------------------------------

Outcome ac5_fit() {
  Outcome o;
  const CostModels shipped = default_cost_models();
  const LatencyModel reference{2.0, 0.001, 500.0};
  const std::vector<std::pair<const char*, LatencyModel>> truths = {
      {"reference", reference},
      {"shipped prefill", shipped.prefill},
      {"shipped decode", shipped.decode},
  };
  auto rel = [](double got, double want) { return std::abs(got - want) / std::abs(want); };

  // Noiseless recovery is judged for every truth. Noisy recovery is judged
  // at the reference coefficients; the shipped ones are reported only,
  // since their alpha1 term is a small share of latency on this grid.
  double clean_worst = 0.0, judged_noisy = 0.0;
  for (const auto& [name, truth] : truths) {
    for (auto kind : {ProfileKind::kPrefill, ProfileKind::kDecode}) {
      const auto clean = testing::profile_grid(truth, kind, 200, 0.0, 1);
      clean_worst = std::max(clean_worst, testing::max_relative_error(fit_latency(clean), truth));
      double a0 = 0.0, a1 = 0.0, b = 0.0;
      for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto f = fit_latency(testing::profile_grid(truth, kind, 200, 0.05, seed));
        a0 = std::max(a0, rel(f.alpha0, truth.alpha0));
        a1 = std::max(a1, rel(f.alpha1, truth.alpha1));
        b = std::max(b, rel(f.beta, truth.beta));
      }
      const bool judged = &truth == &truths.front().second;
      if (judged) {
        judged_noisy = std::max({judged_noisy, a0, a1, b});
      }
      o.note(fmt::format("{} {} on {} grid, +-5% noise, 20 seeds: worst alpha0 {:.4f} alpha1 "
                         "{:.4f} beta {:.4f}",
                         judged ? "judged" : "info  ", name,
                         kind == ProfileKind::kPrefill ? "prefill" : "decode", a0, a1, b));
    }
  }
  // Swap: per-block slope and fixed part from clean samples.
  std::vector<ProfileSample> swaps;
  for (int b = 1; b <= 64; b *= 2) {
    swaps.push_back({ProfileKind::kSwap, b, 0,
                     static_cast<double>(shipped.swap.per_block * b + shipped.swap.fixed)});
  }
  const SwapModel sw = fit_swap(swaps);
  const double swap_err =
      std::max(rel(sw.per_block, shipped.swap.per_block), rel(sw.fixed, shipped.swap.fixed));
  o.pass = clean_worst < 1e-6 && swap_err < 1e-6 && judged_noisy < 0.10;
  o.note(fmt::format("noiseless: worst relative error {:.2e} (latency, all truths), {:.2e} (swap)",
                     clean_worst, swap_err));
  o.note(fmt::format("noisy, n = 200, reference truth: worst {:.4f} (limit 0.10)", judged_noisy));
  return o;
}

// --- AC6 -------------------------------------------------------------------

Outcome ac6_kv() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto res = testing::run_kv_stress(20260601, 100'000, 32, 8, true);
  o.note(fmt::format("{} operations ({} commits, {} releases, {} drop calls) in {:.1f} s",
                     res.operations, res.commits, res.releases, res.drops, seconds_since(t0)));
  o.note(fmt::format("{} checkpoints, {} restores, {} relocations; divergences {}",
                     res.checkpoints, res.restores, res.relocations, res.divergences));
  if (!res.first_divergence.empty()) {
    o.note("first divergence: " + res.first_divergence);
  }

  // One block of eight slots. BE request a holds a1..a3 at the right end;
  // RT request b fills the five free slots and then needs one more, which
  // must checkpoint exactly the slot holding a3.
  const SloConfig slo;
  const Request a = make_request(0, RequestClass::kBestEffort, 0, 3, 8, slo);
  const Request b = make_request(1, RequestClass::kRealTime, 0, 6, 8, slo);
  KvManager kv(1, 8);
  testing::FlatKvReference ref(1, 8);
  auto put = [&](const Request& r, int tokens) {
    auto session = kv.begin_session();
    auto plan = r.is_rt() ? session.find_preempt_block(r, tokens) : session.find_block(r, tokens);
    if (!plan) {
      throw Error("scenario allocation failed");
    }
    std::vector<AllocationPlan> plans{*plan};
    const auto actions = kv.commit(plans);
    if (const auto err = ref.apply(actions); !err.empty()) {
      throw Error(err);
    }
    return static_cast<int>(std::count_if(actions.begin(), actions.end(), [](const KvAction& x) {
      return x.kind == KvActionKind::kCheckpoint;
    }));
  };
  int ck = put(a, 3);
  ck += put(b, 5);
  const int before = ck;
  ck += put(b, 1);
  const auto& table = kv.preemption_table();
  const bool entry_ok = table.size() == 1 && table.begin()->second.slot_count == 1 &&
                        table.begin()->second.be_req == a.id &&
                        table.begin()->second.rt_req == b.id;
  const bool scenario = before == 0 && ck == 1 && entry_ok && kv.swap_in_plan(a.id) == 1 &&
                        ref.compare(kv, {{a.id, 3}, {b.id, 6}}).empty();
  o.note(fmt::format("lazy checkpoint scenario: {} slot(s) checkpointed, {} table entr{}, {}",
                     ck, table.size(), table.size() == 1 ? "y" : "ies",
                     scenario ? "as expected" : "MISMATCH"));
  o.pass = res.operations >= 100'000 && res.divergences == 0 && scenario;
  return o;
}

// --- AC7 -------------------------------------------------------------------

Outcome ac7_ablation(const Shared& s) {
  Outcome o;
  ExperimentConfig off = s.cfg;
  off.pool.bidirectional = false;
  bool top_ok = false;
  for (double rate : s.cfg.rates) {
    const Trace trace = generate_trace(s.cfg.workload_for(rate));
    const auto disabled = run_cell(off, SchedulerKind::kPacking, trace).metrics;
    const auto& enabled = cell(s, SchedulerKind::kPacking, rate).metrics;
    auto ratio = [](double a, double b) { return b > 0 ? a / b : (a > 0 ? 1e9 : 1.0); };
    const double ttft = ratio(enabled.ttft_attainment, disabled.ttft_attainment);
    const double tpot = ratio(enabled.tpot_attainment, disabled.tpot_attainment);
    const bool ok = ttft >= 1.1 && tpot >= 1.1;
    if (rate == s.cfg.rates.back()) {
      top_ok = ok;
    }
    o.note(fmt::format("rate {}: TTFT {:.4f} vs {:.4f} ({:.3f}x), TPOT {:.4f} vs {:.4f} ({:.3f}x), "
                       "BE {:.2f} vs {:.2f} req/s",
                       rate, enabled.ttft_attainment, disabled.ttft_attainment, ttft,
                       enabled.tpot_attainment, disabled.tpot_attainment, tpot,
                       enabled.be_throughput_rps, disabled.be_throughput_rps));
  }
  o.pass = top_ok;
  o.note("criterion judged at the highest rate, where memory pressure is greatest");

  // Not judged: the default pool leaves little room for sharing to matter,
  // so also show a half-size pool over a shorter horizon.
  ExperimentConfig tight = s.cfg;
  tight.pool.num_blocks = s.cfg.pool.num_blocks / 2;
  tight.horizon_s = 120.0;
  ExperimentConfig tight_off = tight;
  tight_off.pool.bidirectional = false;
  const double rate = s.cfg.rates.back();
  const Trace trace = generate_trace(tight.workload_for(rate));
  const auto on = run_cell(tight, SchedulerKind::kPacking, trace).metrics;
  const auto offm = run_cell(tight_off, SchedulerKind::kPacking, trace).metrics;
  o.note(fmt::format("info: {} blocks, {} s, rate {}: TTFT {:.4f} vs {:.4f}, TPOT {:.4f} vs {:.4f}",
                     tight.pool.num_blocks, tight.horizon_s, rate, on.ttft_attainment,
                     offm.ttft_attainment, on.tpot_attainment, offm.tpot_attainment));
  return o;
}

// --- AC8 -------------------------------------------------------------------

Outcome ac8_groups(const Shared& s) {
  Outcome o;
  const EventLog& log = *s.packing_log;
  std::int64_t tokens = 0, wrong_k = 0;
  for (const auto& r : log.records) {
    for (int k : r.rt_k) {
      ++tokens;
      wrong_k += k != 1;
    }
  }
  SloConfig per_token = s.cfg.slo;
  per_token.token_group_size = 1;
  SloConfig grouped = s.cfg.slo;
  grouped.token_group_size = 4;
  const auto g1 = compute_metrics(log, s.packing_trace, per_token);
  const auto g4 = compute_metrics(log, s.packing_trace, grouped);
  o.pass = log.token_group_size == 1 && tokens > 0 && wrong_k == 0 &&
           g4.tpot_attainment >= g1.tpot_attainment;
  o.note(fmt::format("run group size {}: {} scheduled RT tokens, {} with open group size != 1",
                     log.token_group_size, tokens, wrong_k));
  o.note(fmt::format("per-token TPOT attainment {:.4f}; same log judged in groups of 4: {:.4f}",
                     g1.tpot_attainment, g4.tpot_attainment));
  return o;
}

// --- AC9 -------------------------------------------------------------------

Outcome ac9_determinism(const Shared& s) {
  Outcome o;
  ExperimentConfig cfg = s.cfg;
  cfg.horizon_s = 60.0;
  SweepOptions parallel;
  parallel.jobs = std::max(2, jobs());
  const auto a = run_sweep(cfg, parallel);
  const auto b = run_sweep(cfg, SweepOptions{});
  int same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    same += a[i].digest == b[i].digest && a[i].metrics == b[i].metrics;
  }
  const Trace t = generate_trace(cfg.workload_for(cfg.rates.back()));
  const auto c1 = run_cell(cfg, SchedulerKind::kPacking, t).log.digest();
  const auto c2 = run_cell(cfg, SchedulerKind::kPacking, t).log.digest();
  o.pass = same == static_cast<int>(a.size()) && a.size() == b.size() && c1 == c2;
  o.note(fmt::format("{} of {} cells identical between a parallel and a sequential sweep (60 s)",
                     same, a.size()));
  o.note(fmt::format("repeated packing run digest {}", c1 == c2 ? c1 : "DIFFERS"));
  return o;
}

// --- AC10 ------------------------------------------------------------------

Outcome ac10_micro() {
  Outcome o;
  bool ok = true;
  for (int n = 1; n <= 3; ++n) {
    const auto mc = testing::round_robin_case(n);
    const auto rr = testing::run_micro_case(mc, SchedulerKind::kRoundRobin);
    const auto pk = testing::run_micro_case(mc, SchedulerKind::kPacking);
    bool expected_rr = false;
    switch (n) {
      case 1:
        expected_rr = rr.ttft_met && rr.tpot_met;
        break;
      case 2:
        expected_rr = !rr.tpot_met;
        break;
      default:
        expected_rr = !rr.ttft_met;
    }
    const bool packing_ok = pk.ttft_met && pk.tpot_met;
    ok = ok && expected_rr && packing_ok;
    o.note(fmt::format("case {} ({}): rr ttft {} tpot {} | packing ttft {} tpot {} {}", n, mc.name,
                       rr.ttft_met ? "met" : "missed", rr.tpot_met ? "met" : "missed",
                       pk.ttft_met ? "met" : "missed", pk.tpot_met ? "met" : "missed",
                       expected_rr && packing_ok ? "ok" : "UNEXPECTED"));
  }
  o.pass = ok;
  return o;
}

}  // namespace
}  // namespace rtbe

int main() {
  using namespace rtbe;
  Shared s;
  s.cfg = default_config();

  struct Criterion {
    const char* id;
    const char* title;
    std::function<Outcome()> run;
    const char* needs = nullptr;  // criterion whose runs this one reuses
  };
  const std::vector<Criterion> criteria = {
      {"AC1", "scheduler feasibility", [&] { return ac1_feasibility(s); }},
      {"AC2", "oracle consistency", [&] { return ac2_oracle(s); }},
      {"AC3", "latency/throughput trade-off", [&] { return ac3_tradeoff(s); }},
      {"AC4", "TTFT attainment ordering", [&] { return ac4_attainment(s); }, "AC3"},
      {"AC5", "cost-model fit recovery", [] { return ac5_fit(); }},
      {"AC6", "KV manager reference equivalence", [] { return ac6_kv(); }},
      {"AC7", "shared-block ablation", [&] { return ac7_ablation(s); }, "AC3"},
      {"AC8", "token group size", [&] { return ac8_groups(s); }, "AC1"},
      {"AC9", "determinism", [&] { return ac9_determinism(s); }},
      {"AC10", "round-robin micro-traces", [] { return ac10_micro(); }},
  };

  int failed = 0, ran = 0;
  // RTBE_ACCEPTANCE_ONLY=AC<n> runs one criterion and the one it reuses.
  const char* only = std::getenv("RTBE_ACCEPTANCE_ONLY");
  std::string needed;
  if (only && *only) {
    for (const auto& c : criteria) {
      if (only == std::string(c.id) && c.needs) {
        needed = c.needs;
      }
    }
  }
  for (const auto& c : criteria) {
    if (only && *only && std::string(only) != c.id && needed != c.id) {
      continue;
    }
    Outcome out;
    const auto t0 = Clock::now();
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.note(std::string("exception: ") + e.what());
    }
    ++ran;
    failed += !out.pass;
    std::printf("%s %s: %s (%.1f s)\n", out.pass ? "PASS" : "FAIL", c.id, c.title,
                seconds_since(t0));
    for (const auto& n : out.notes) {
      std::printf("    %s\n", n.c_str());
    }
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
