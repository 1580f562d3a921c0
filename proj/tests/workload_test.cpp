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
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "rtbe/config.h"
#include "rtbe/errors.h"
#include "rtbe/workload.h"

namespace rtbe {
namespace {

WorkloadSpec small_spec() {
  WorkloadSpec w;
  w.rt_rate = 6.0;
  w.duration_s = 600.0;
  w.be_batch_size = 16;
  w.seed = 11;
  return w;
}

std::size_t count_class(const Trace& t, RequestClass cls) {
  return static_cast<std::size_t>(std::count_if(
      t.entries.begin(), t.entries.end(), [&](const TraceEntry& e) { return e.cls == cls; }));
}

TEST(Workload, PoissonArrivalCountWithinThreeSigma) {
  for (std::uint64_t seed : {1, 2, 3}) {
    auto w = small_spec();
    w.seed = seed;
    const auto t = generate_trace(w);
    const double mean = w.rt_rate * w.duration_s;
    const double n = static_cast<double>(count_class(t, RequestClass::kRealTime));
    EXPECT_LE(std::abs(n - mean), 3.0 * std::sqrt(mean)) << "seed " << seed;
  }
}

TEST(Workload, RtArrivalsAreSortedAndInsideTheHorizon) {
  const auto t = generate_trace(small_spec());
  Micros last = 0;
  for (const auto& e : t.entries) {
    if (e.cls == RequestClass::kRealTime) {
      EXPECT_GE(e.arrival_time, last);
      EXPECT_LT(e.arrival_time, 600'000'000);
      last = e.arrival_time;
    }
  }
}

TEST(Workload, BeLengthsStayInRangeAndWavesAreFull) {
  const auto w = small_spec();
  const auto t = generate_trace(w);
  std::map<int, int> per_wave;
  for (const auto& e : t.entries) {
    if (e.cls != RequestClass::kBestEffort) {
      continue;
    }
    EXPECT_GE(e.prompt_len, w.be_prompt_lo);
    EXPECT_LE(e.prompt_len, w.be_prompt_hi);
    EXPECT_GE(e.output_len, w.be_output_lo);
    EXPECT_LE(e.output_len, w.be_output_hi);
    ++per_wave[e.wave()];
  }
  EXPECT_EQ(per_wave.size(), 600u);
  for (const auto& [wave, n] : per_wave) {
    EXPECT_EQ(n, w.be_batch_size) << "wave " << wave;
  }
  EXPECT_EQ(per_wave.begin()->first, 0);
}

TEST(Workload, MaxRtRequestsCapsTheTrace) {
  auto w = small_spec();
  w.max_rt_requests = 10;
  EXPECT_EQ(count_class(generate_trace(w), RequestClass::kRealTime), 10u);
}

TEST(Workload, IdenticalSpecsGiveIdenticalTraces) {
  const auto w = small_spec();
  EXPECT_EQ(generate_trace(w), generate_trace(w));
  auto other = w;
  other.seed = w.seed + 1;
  EXPECT_NE(generate_trace(w), generate_trace(other));
}

// Reference statistics of the synthetic BE workload: prompts 784.14 +- 151.17,
// outputs 80.96 +- 28.23 tokens.
TEST(Workload, BeStatisticsMatchReferenceTable) {
  auto w = small_spec();
  w.be_batch_size = 1000;
  w.be_waves = 10;
  w.duration_s = 10.0;
  const auto s = length_stats(generate_trace(w), RequestClass::kBestEffort);
  ASSERT_EQ(s.count, 10'000u);
  EXPECT_NEAR(s.avg_prompt, 784.14, 0.05 * 784.14);
  EXPECT_NEAR(s.avg_output, 80.96, 0.05 * 80.96);
  EXPECT_NEAR(s.std_prompt, 151.17, 0.05 * 151.17);
  EXPECT_NEAR(s.std_output, 28.23, 0.05 * 28.23);
}

// Chat corpus reference: prompts 222.76 +- 256.36, outputs 234.51 +- 268.50.
TEST(Workload, RtLengthsFollowTheChatCorpus) {
  auto w = small_spec();
  w.be_batch_size = 0;
  w.rt_rate = 50.0;
  for (const std::string file : {std::string(), default_data_path("rt_lengths.csv")}) {
    w.rt_length_file = file;
    const auto s = length_stats(generate_trace(w), RequestClass::kRealTime);
    ASSERT_GT(s.count, 20'000u);
    EXPECT_NEAR(s.avg_prompt, 222.76, 0.1 * 222.76) << file;
    EXPECT_NEAR(s.avg_output, 234.51, 0.1 * 234.51) << file;
    EXPECT_NEAR(s.std_prompt, 256.36, 0.15 * 256.36) << file;
    EXPECT_NEAR(s.std_output, 268.50, 0.15 * 268.50) << file;
  }
}

TEST(Workload, ZeroBatchSizeDisablesBe) {
  auto w = small_spec();
  w.be_batch_size = 0;
  EXPECT_EQ(count_class(generate_trace(w), RequestClass::kBestEffort), 0u);
}

TEST(Workload, InvalidSpecsAreRejected) {
  auto w = small_spec();
  w.rt_rate = 0.0;
  EXPECT_THROW(w.validate(), ConfigError);
  w = small_spec();
  w.be_prompt_lo = 900;
  w.be_prompt_hi = 100;
  EXPECT_THROW(w.validate(), ConfigError);
  w = small_spec();
  w.duration_s = -1.0;
  EXPECT_THROW(w.validate(), ConfigError);
}

TEST(Workload, MissingLengthFileIsAnIoError) {
  auto w = small_spec();
  w.rt_length_file = "/nonexistent/lengths.csv";
  EXPECT_THROW(generate_trace(w), IoError);
  EXPECT_THROW(load_length_pairs(w.rt_length_file), IoError);
}

TEST(TraceCsv, RoundTripsThroughText) {
  const auto t = generate_trace(small_spec());
  EXPECT_EQ(parse_trace_csv(trace_to_csv(t)), t);
  const auto dir = std::filesystem::path(RTBE_TEST_TMP) / "workload";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "trace.csv").string();
  save_trace(path, t);
  EXPECT_EQ(load_trace(path), t);
}

TEST(TraceCsv, HeaderOnlyIsAnEmptyTrace) {
  const auto t = parse_trace_csv(trace_to_csv(Trace{}));
  EXPECT_TRUE(t.entries.empty());
}

TEST(TraceCsv, ErrorsCarryTheLineNumber) {
  const std::string header = trace_to_csv(Trace{});
  try {
    parse_trace_csv(header + "0,RT,10,5\n100,RT,0,5\n");
    FAIL() << "zero prompt accepted";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse_trace_csv(header + "0,XX,10,5\n"), ParseError);
  EXPECT_THROW(parse_trace_csv(header + "0,RT,10\n"), ParseError);
  EXPECT_THROW(parse_trace_csv(header + "5,RT,10,5\n4,RT,10,5\n"), ParseError);
  EXPECT_THROW(parse_trace_csv("time,class\n"), ParseError);
  EXPECT_THROW(load_trace("/nonexistent/trace.csv"), IoError);
}

TEST(LengthStats, MatchesHandComputation) {
  Trace t;
  t.entries = {{0, RequestClass::kRealTime, 2, 10}, {1, RequestClass::kRealTime, 4, 20},
               {-1, RequestClass::kBestEffort, 100, 1}};
  const auto s = length_stats(t, RequestClass::kRealTime);
  EXPECT_EQ(s.count, 2u);
  EXPECT_DOUBLE_EQ(s.avg_prompt, 3.0);
  EXPECT_DOUBLE_EQ(s.std_prompt, 1.0);
  EXPECT_DOUBLE_EQ(s.avg_output, 15.0);
  EXPECT_DOUBLE_EQ(s.std_output, 5.0);
  EXPECT_EQ(length_stats(Trace{}, RequestClass::kBestEffort).count, 0u);
}

}  // namespace
}  // namespace rtbe
