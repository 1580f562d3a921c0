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

namespace rtbe {

// Lognormal fallback for RT lengths. The defaults reproduce a chat corpus
// with mean/std prompt 222.76/256.36 and output 234.51/268.50 tokens.
struct LognormalLengths {
  double prompt_mu = 4.9843;
  double prompt_sigma = 0.9184;
  double output_mu = 5.0386;
  double output_sigma = 0.9153;
  int max_len = 2048;
};

struct WorkloadSpec {
  double rt_rate = 6.0;       // Poisson arrivals per second
  std::string rt_length_file;  // CSV prompt_len,output_len; empty selects lognormal
  LognormalLengths lognormal;
  int be_prompt_lo = 512;
  int be_prompt_hi = 1024;
  int be_output_lo = 32;
  int be_output_hi = 128;
  int be_batch_size = 256;  // requests per BE wave, 0 disables BE traffic
  int be_waves = 0;        // 0 means one wave per second of duration
  double duration_s = 600.0;
  int max_rt_requests = 0;  // 0 means unlimited
  std::uint64_t seed = 1;

  // Throws ConfigError on empty ranges, nonpositive rate or duration.
  void validate() const;
};

// A BE entry with arrival_time = -N (N >= 1) belongs to wave N and is
// submitted when every earlier BE request has finished. Everything else
// arrives at its timestamp.
struct TraceEntry {
  Micros arrival_time = 0;
  RequestClass cls = RequestClass::kRealTime;
  int prompt_len = 1;
  int output_len = 1;

  int wave() const { return arrival_time < 0 ? static_cast<int>(-arrival_time) : 0; }
  bool operator==(const TraceEntry&) const = default;
};

struct Trace {
  std::vector<TraceEntry> entries;
  bool operator==(const Trace&) const = default;
};

struct LengthPair {
  int prompt_len = 1;
  int output_len = 1;
};

// Pure function of the spec: identical specs give identical traces.
// Throws IoError if the length file cannot be read.
Trace generate_trace(const WorkloadSpec& spec);

std::vector<LengthPair> load_length_pairs(const std::string& path);

std::string trace_to_csv(const Trace& trace);
// Throws ParseError (with 1-based line) on malformed rows.
Trace parse_trace_csv(const std::string& text);
Trace load_trace(const std::string& path);
void save_trace(const std::string& path, const Trace& trace);

struct LengthStats {
  std::size_t count = 0;
  double avg_prompt = 0.0;
  double std_prompt = 0.0;
  double avg_output = 0.0;
  double std_output = 0.0;
};

LengthStats length_stats(const Trace& trace, RequestClass cls);

}  // namespace rtbe
