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
#include <string>
#include <vector>

#include "rtbe/core.h"
#include "rtbe/cost_model.h"
#include "rtbe/scheduler.h"
#include "rtbe/sim_engine.h"
#include "rtbe/workload.h"

namespace rtbe {

// Everything one experiment needs. data/default_config.yaml documents the
// file format key by key.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  double horizon_s = 600.0;
  std::string output_dir = "out";
  std::vector<SchedulerKind> schedulers{SchedulerKind::kPacking, SchedulerKind::kFcfs,
                                        SchedulerKind::kRoundRobin};
  std::vector<double> rates{2.0, 6.0, 10.0};
  SloConfig slo;
  PoolConfig pool;
  CostModels models = default_cost_models();
  std::string models_file;  // resolved path, empty when inline or default
  SchedulerOptions scheduler;
  Micros overhead_us = 0;
  WorkloadSpec workload;  // rt_rate, duration_s and seed are set per cell
  bool write_logs = false;
  bool check_invariants = false;

  // Throws ConfigError.
  void validate() const;
  SimConfig sim_config(SchedulerKind kind) const;
  WorkloadSpec workload_for(double rate) const;
};

// Relative paths inside the document resolve against `base_dir`.
ExperimentConfig parse_config(const std::string& yaml_text, const std::string& base_dir);
ExperimentConfig load_config(const std::string& path);
// The shipped data/default_config.yaml.
ExperimentConfig default_config();
std::string default_data_path(const std::string& file);

// $RTBE_OUTPUT_ROOT replaces the configured output directory when set.
std::string resolve_output_dir(const ExperimentConfig& config);

}  // namespace rtbe
