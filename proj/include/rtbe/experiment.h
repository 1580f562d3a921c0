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
#include <vector>

#include "rtbe/config.h"
#include "rtbe/metrics.h"
#include "rtbe/sim_engine.h"
#include "rtbe/workload.h"

namespace rtbe {

struct RunResult {
  EventLog log;
  MetricsReport metrics;
};

// Runs one scheduler over one trace to the configured horizon.
RunResult run_cell(const ExperimentConfig& config, SchedulerKind kind, const Trace& trace);

struct CellSummary {
  SchedulerKind kind = SchedulerKind::kPacking;
  double rate = 0.0;
  std::string digest;
  MetricsReport metrics;
};

struct SweepOptions {
  int jobs = 1;
  // When set, each cell's log and report are written under this directory.
  std::string output_dir;
};

// Every scheduler at a given rate replays the same trace. Results are
// ordered by rate, then by the configured scheduler order.
std::vector<CellSummary> run_sweep(const ExperimentConfig& config, const SweepOptions& options = {});

// Fixed-width text table, one row per cell.
std::string comparison_table(const std::vector<CellSummary>& cells);
std::string comparison_csv(const std::vector<CellSummary>& cells);

// File stem used for a cell's outputs, for example "packing_r6".
std::string cell_name(SchedulerKind kind, double rate);

}  // namespace rtbe
