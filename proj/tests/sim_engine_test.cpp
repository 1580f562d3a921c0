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

#include <gtest/gtest.h>

#include <algorithm>

#include "kv_reference.h"
#include "rtbe/errors.h"
#include "rtbe/metrics.h"
#include "rtbe/sim_engine.h"

namespace rtbe {
namespace {

// Prefill takes 200 ms and decode 100 ms whatever the batch.
SimConfig flat_config(SchedulerKind kind = SchedulerKind::kPacking) {
  SimConfig c;
  c.scheduler.kind = kind;
  c.models.prefill = {0.0, 0.0, 200'000.0};
  c.models.decode = {0.0, 0.0, 100'000.0};
  c.models.swap = {0.0, 0.0};
  c.pool = {512, 16, true};  // room for the longest sampled prompt
  c.horizon = 10'000'000;
  c.check_invariants = true;
  return c;
}

Trace small_mixed_trace() {
  WorkloadSpec w;
  w.rt_rate = 4.0;
  w.duration_s = 5.0;
  w.be_batch_size = 8;
  w.seed = 4;
  return generate_trace(w);
}

TEST(Simulator, SingleRequestHandTrace) {
  Trace t;
  t.entries = {{0, RequestClass::kRealTime, 8, 2}};
  for (auto kind : {SchedulerKind::kPacking, SchedulerKind::kFcfs, SchedulerKind::kRoundRobin}) {
    Simulator sim(flat_config(kind), t);
    sim.run();
    const auto& log = sim.log();
    ASSERT_EQ(log.records.size(), 2u);
    EXPECT_EQ(log.records[0].start, 0);
    EXPECT_EQ(log.records[0].end, 200'000);
    EXPECT_EQ(log.records[1].end, 300'000);
    EXPECT_EQ(log.records[1].finished, std::vector<RequestId>{0});
    EXPECT_EQ(sim.requests()[0].phase, Phase::kFinished);
    EXPECT_FALSE(sim.kv().holds(0));

    const auto m = compute_metrics(log, t, SloConfig{});
    ASSERT_EQ(m.requests.size(), 1u);
    EXPECT_EQ(m.requests[0].ttft, 200'000);
    EXPECT_EQ(m.requests[0].finish, 300'000);
    EXPECT_DOUBLE_EQ(m.requests[0].mean_tpot, 100'000.0);
    EXPECT_DOUBLE_EQ(m.requests[0].normalized_latency, 150'000.0);
    EXPECT_TRUE(m.requests[0].ttft_met);
  }
}

TEST(Simulator, EmptyTraceDoesNothing) {
  Simulator sim(flat_config(), Trace{});
  EXPECT_FALSE(sim.step());
  const auto& log = sim.log();
  EXPECT_TRUE(log.records.empty());
  EXPECT_EQ(log.end_clock, 0);
}

TEST(Simulator, IdleClockJumpsToNextArrival) {
  Trace t;
  t.entries = {{50'000, RequestClass::kRealTime, 8, 1}};
  Simulator sim(flat_config(), t);
  ASSERT_TRUE(sim.step());
  ASSERT_EQ(sim.log().records.size(), 1u);
  EXPECT_EQ(sim.log().records[0].start, 50'000);
  EXPECT_EQ(sim.clock(), 250'000);
}

TEST(Simulator, OverheadIsChargedPerIteration) {
  Trace t;
  t.entries = {{0, RequestClass::kRealTime, 8, 2}};
  auto c = flat_config();
  c.overhead_us = 1'000;
  Simulator sim(c, t);
  sim.run();
  EXPECT_EQ(sim.log().records.back().end, 302'000);
}

TEST(Simulator, ContextGrowsByOneTokenPerIteration) {
  Trace t;
  t.entries = {{0, RequestClass::kBestEffort, 10, 6}};
  Simulator sim(flat_config(), t);
  int last = sim.requests()[0].context_len;
  while (sim.step()) {
    const auto& r = sim.requests()[0];
    EXPECT_EQ(r.context_len, last + 1);
    EXPECT_EQ(r.context_len, r.prompt_len + r.generated);
    last = r.context_len;
  }
  EXPECT_EQ(sim.requests()[0].generated, 6);
}

TEST(Simulator, HorizonStopsTheRun) {
  Trace t;
  t.entries = {{0, RequestClass::kBestEffort, 10, 100}};
  auto c = flat_config();
  c.horizon = 1'000'000;
  Simulator sim(c, t);
  sim.run();
  EXPECT_LE(sim.log().records.back().start, c.horizon);
  EXPECT_LT(sim.requests()[0].generated, 100);
}

TEST(Simulator, LaterWavesWaitForEarlierBe) {
  Trace t;
  t.entries = {{0, RequestClass::kBestEffort, 8, 2}, {-1, RequestClass::kBestEffort, 8, 2}};
  Simulator sim(flat_config(), t);
  sim.run();
  const auto& recs = sim.log().records;
  ASSERT_EQ(recs.size(), 4u);
  EXPECT_EQ(recs[1].finished, std::vector<RequestId>{0});
  EXPECT_EQ(recs[2].released_waves, std::vector<int>{1});
  EXPECT_EQ(recs[2].be_ids, std::vector<RequestId>{1});
  EXPECT_EQ(sim.log().release_times[1], recs[1].end);
}

// An RT request arriving into a pool full of BE data preempts slots; every
// step's actions replay cleanly on the slot-level reference model.
TEST(Simulator, PreemptionActionsReplayOnReference) {
  Trace t;
  // Each fits the 16-slot block alone; together they need 19 slots.
  t.entries = {{0, RequestClass::kBestEffort, 8, 6}, {150'000, RequestClass::kRealTime, 10, 3}};
  auto c = flat_config();
  c.pool = {1, 16, true};
  Simulator sim(c, t);
  testing::FlatKvReference ref(1, 16);
  int checkpoints = 0;
  for (bool more = true; more;) {
    const auto before = sim.log().records.size();
    more = sim.step();
    const auto& actions = sim.last_actions();
    ASSERT_EQ(ref.apply(actions), "") << "iteration " << sim.log().records.size();
    if (sim.log().records.size() == before) {
      EXPECT_TRUE(actions.empty());  // idle jump to the next arrival
      continue;
    }
    const int seen = static_cast<int>(std::count_if(
        actions.begin(), actions.end(),
        [](const KvAction& a) { return a.kind == KvActionKind::kCheckpoint; }));
    EXPECT_EQ(seen, sim.log().records.back().checkpoints);
    checkpoints += seen;
    for (RequestId id : {0, 1}) {
      if (sim.kv().holds(id)) {
        EXPECT_EQ(static_cast<std::int64_t>(ref.tokens_of(id).size()), sim.kv().stored_tokens(id));
      }
    }
  }
  EXPECT_GT(checkpoints, 0);
  EXPECT_EQ(sim.requests()[0].phase, Phase::kFinished);
  EXPECT_EQ(sim.requests()[1].phase, Phase::kFinished);
}

TEST(Simulator, IdenticalRunsGiveIdenticalDigests) {
  const auto t = small_mixed_trace();
  for (auto kind : {SchedulerKind::kPacking, SchedulerKind::kFcfs, SchedulerKind::kRoundRobin}) {
    auto c = flat_config(kind);
    c.models = default_cost_models();
    Simulator a(c, t);
    Simulator b(c, t);
    a.run();
    b.run();
    EXPECT_EQ(a.log().digest(), b.log().digest());
    EXPECT_EQ(a.log().digest().size(), 64u);
    EXPECT_GT(a.log().records.size(), 10u);
  }
}

TEST(EventLog, JsonlRoundTrip) {
  auto c = flat_config();
  c.models = default_cost_models();
  Simulator sim(c, small_mixed_trace());
  sim.run();
  const auto log = sim.take_log();
  const auto back = EventLog::from_jsonl(log.to_jsonl());
  EXPECT_EQ(back, log);
  EXPECT_EQ(back.digest(), log.digest());
}

TEST(EventLog, MalformedLinesReportTheirPosition) {
  Simulator sim(flat_config(), Trace{{{0, RequestClass::kRealTime, 8, 2}}});
  sim.run();
  auto text = sim.log().to_jsonl();
  text += "{not json\n";
  try {
    EventLog::from_jsonl(text);
    FAIL() << "malformed log accepted";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
  EXPECT_THROW(EventLog::from_jsonl(""), ParseError);
}

TEST(SimConfig, RejectsBadSettings) {
  auto c = flat_config();
  c.horizon = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = flat_config();
  c.pool.num_blocks = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = flat_config();
  c.scheduler.b_max = 1;
  EXPECT_THROW(c.validate(), ConfigError);
}

}  // namespace
}  // namespace rtbe
