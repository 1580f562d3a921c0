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

#include <string>
#include <utility>
#include <vector>

#include "rtbe/core.h"
#include "rtbe/sim_engine.h"
#include "rtbe/workload.h"

namespace rtbe {

// Per RT request. Times are microseconds; -1 marks "not observed".
struct RequestMetrics {
  RequestId id = 0;
  Micros arrival = 0;
  int output_len = 0;
  int emitted = 0;
  bool finished = false;
  Micros ttft = -1;
  Micros finish = -1;
  double mean_tpot = -1.0;
  double normalized_latency = -1.0;
  bool ttft_observable = false;
  bool ttft_met = false;
  // Token groups after the first-token group whose deadline either passed
  // or was met before the log ended.
  int tpot_groups = 0;
  int tpot_groups_met = 0;
  double tpot_attainment = -1.0;
  Micros queueing = -1;
  double queueing_proportion = -1.0;

  bool operator==(const RequestMetrics&) const = default;
};

struct MetricsReport {
  std::string scheduler;
  Micros horizon = 0;
  int token_group_size = 1;
  std::vector<RequestMetrics> requests;

  std::int64_t rt_total = 0;
  std::int64_t rt_finished = 0;
  std::int64_t rt_unfinished = 0;
  std::int64_t be_finished = 0;
  std::int64_t be_tokens = 0;
  double mean_normalized_latency = 0.0;  // finished RT only
  double mean_ttft = 0.0;
  double mean_tpot = 0.0;
  double ttft_attainment = 0.0;
  double tpot_attainment = 0.0;
  double be_throughput_rps = 0.0;
  double be_throughput_tps = 0.0;
  double queueing_proportion = 0.0;
  std::int64_t iterations = 0;

  bool operator==(const MetricsReport&) const = default;
};

// Derives every metric from the log. `slo.token_group_size` sets the group
// size used to judge TPOT deadlines, which need not match the run's.
// Throws ConsistencyError if the log names unknown requests or emits more
// tokens than a request asked for.
MetricsReport compute_metrics(const EventLog& log, const Trace& trace, const SloConfig& slo);

enum class ReportFormat { kCsv, kJson };

// CSV writes the aggregate row to `path` and per-request rows next to it
// with a "_requests" suffix. JSON writes one document.
void export_report(const MetricsReport& report, ReportFormat format, const std::string& path);
std::string report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const std::string& text);
MetricsReport load_report_json(const std::string& path);
std::string aggregate_csv(const std::vector<MetricsReport>& reports);
std::string requests_csv(const MetricsReport& report);

// One two-column TSV per metric: <dir>/<metric>_<scheduler>.tsv with rows
// (rate, value). Returns the written paths.
std::vector<std::string> write_plot_data(const std::string& dir, const std::string& scheduler,
                                         const std::vector<std::pair<double, MetricsReport>>& rows);

}  // namespace rtbe
