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

#include "rtbe/metrics.h"
#include "rtbe/sim_engine.h"
#include "rtbe/workload.h"

namespace rtbe::testing {

// Three-request traces around one probe RT request that needs three
// iterations (prompt, then two decode tokens).
//   1: short BE work interleaves harmlessly.
//   2: long BE prefills stretch the gap between the probe's tokens.
//   3: earlier RT requests fill a batch cap of two, so the probe waits for
//      one of them to finish before its first token.
struct MicroCase {
  std::string name;
  SimConfig config;
  Trace trace;
  RequestId probe = 0;
};

MicroCase round_robin_case(int number);

struct ProbeOutcome {
  bool ttft_met = false;
  bool tpot_met = false;
  RequestMetrics metrics;
};

ProbeOutcome run_micro_case(const MicroCase& mc, SchedulerKind kind);

}  // namespace rtbe::testing
