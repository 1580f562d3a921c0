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

#include "rtbe/workload.h"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "io_util.h"
#include "rtbe/errors.h"

namespace rtbe {

namespace {

constexpr const char* kTraceHeader = "arrival_us,class,prompt_len,output_len";

// Independent generator per purpose so that, for example, changing the
// rate does not perturb the BE lengths.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id)};
  return std::mt19937_64(seq);
}

int clip_length(double v, int max_len) {
  return static_cast<int>(std::clamp(std::llround(v), 1LL, static_cast<long long>(max_len)));
}

}  // namespace

void WorkloadSpec::validate() const {
  if (!(rt_rate > 0.0)) {
    throw ConfigError("rt_rate must be positive");
  }
  if (!(duration_s > 0.0)) {
    throw ConfigError("duration_s must be positive");
  }
  if (be_prompt_lo < 1 || be_prompt_hi < be_prompt_lo || be_output_lo < 1 ||
      be_output_hi < be_output_lo) {
    throw ConfigError("BE length ranges must be nonempty and start at 1 or more");
  }
  if (be_batch_size < 0 || be_waves < 0 || max_rt_requests < 0) {
    throw ConfigError("BE batch size, wave count and RT request cap must be nonnegative");
  }
  if (lognormal.max_len < 1 || lognormal.prompt_sigma < 0 || lognormal.output_sigma < 0) {
    throw ConfigError("lognormal length parameters are invalid");
  }
}

std::vector<LengthPair> load_length_pairs(const std::string& path) {
  const std::string text = detail::read_file(path);
  const auto lines = detail::split_lines(text);
  if (lines.empty() || detail::trim(lines[0]) != "prompt_len,output_len") {
    throw ParseError("expected header prompt_len,output_len in " + path, 1);
  }
  std::vector<LengthPair> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (detail::trim(lines[i]).empty()) {
      continue;
    }
    const auto f = detail::split_line(lines[i]);
    LengthPair p;
    if (f.size() != 2 || !detail::parse_number(f[0], p.prompt_len) ||
        !detail::parse_number(f[1], p.output_len) || p.prompt_len < 1 || p.output_len < 1) {
      throw ParseError("malformed length pair in " + path, i + 1);
    }
    out.push_back(p);
  }
  if (out.empty()) {
    throw ParseError("no length pairs in " + path, lines.size());
  }
  return out;
}

Trace generate_trace(const WorkloadSpec& spec) {
  spec.validate();
  std::vector<LengthPair> pairs;
  if (!spec.rt_length_file.empty()) {
    pairs = load_length_pairs(spec.rt_length_file);
  }

  Trace trace;
  auto arrivals = stream(spec.seed, 1);
  auto rt_lengths = stream(spec.seed, 2);
  auto be_lengths = stream(spec.seed, 3);

  std::exponential_distribution<double> gap(spec.rt_rate);
  std::uniform_int_distribution<std::size_t> pick(0, pairs.empty() ? 0 : pairs.size() - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto& ln = spec.lognormal;

  double t = 0.0;
  int count = 0;
  while (spec.max_rt_requests == 0 || count < spec.max_rt_requests) {
    t += gap(arrivals);
    if (t >= spec.duration_s) {
      break;
    }
    TraceEntry e;
    e.cls = RequestClass::kRealTime;
    e.arrival_time = static_cast<Micros>(std::llround(t * 1e6));
    if (!pairs.empty()) {
      const auto& p = pairs[pick(rt_lengths)];
      e.prompt_len = p.prompt_len;
      e.output_len = p.output_len;
    } else {
      e.prompt_len = clip_length(std::exp(ln.prompt_mu + ln.prompt_sigma * normal(rt_lengths)),
                                 ln.max_len);
      e.output_len = clip_length(std::exp(ln.output_mu + ln.output_sigma * normal(rt_lengths)),
                                 ln.max_len);
    }
    trace.entries.push_back(e);
    ++count;
  }

  const int waves = spec.be_waves > 0 ? spec.be_waves
                                      : static_cast<int>(std::ceil(spec.duration_s));
  std::uniform_int_distribution<int> be_prompt(spec.be_prompt_lo, spec.be_prompt_hi);
  std::uniform_int_distribution<int> be_output(spec.be_output_lo, spec.be_output_hi);
  for (int w = 0; w < waves && spec.be_batch_size > 0; ++w) {
    for (int i = 0; i < spec.be_batch_size; ++i) {
      TraceEntry e;
      e.cls = RequestClass::kBestEffort;
      e.arrival_time = w == 0 ? 0 : -static_cast<Micros>(w);
      e.prompt_len = be_prompt(be_lengths);
      e.output_len = be_output(be_lengths);
      trace.entries.push_back(e);
    }
  }
  return trace;
}

std::string trace_to_csv(const Trace& trace) {
  std::string out = std::string(kTraceHeader) + "\n";
  for (const auto& e : trace.entries) {
    out += fmt::format("{},{},{},{}\n", e.arrival_time, to_string(e.cls), e.prompt_len,
                       e.output_len);
  }
  return out;
}

Trace parse_trace_csv(const std::string& text) {
  const auto lines = detail::split_lines(text);
  if (lines.empty() || detail::trim(lines[0]) != kTraceHeader) {
    throw ParseError(std::string("expected header ") + kTraceHeader, 1);
  }
  Trace trace;
  Micros last_rt = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (detail::trim(lines[i]).empty()) {
      continue;
    }
    const auto f = detail::split_line(lines[i]);
    if (f.size() != 4) {
      throw ParseError("expected 4 fields", i + 1);
    }
    TraceEntry e;
    const auto cls = detail::trim(f[1]);
    if (cls == "RT") {
      e.cls = RequestClass::kRealTime;
    } else if (cls == "BE") {
      e.cls = RequestClass::kBestEffort;
    } else {
      throw ParseError("class must be RT or BE", i + 1);
    }
    if (!detail::parse_number(f[0], e.arrival_time) || !detail::parse_number(f[2], e.prompt_len) ||
        !detail::parse_number(f[3], e.output_len)) {
      throw ParseError("malformed number", i + 1);
    }
    if (e.prompt_len < 1 || e.output_len < 1) {
      throw ParseError("lengths must be at least 1", i + 1);
    }
    if (e.cls == RequestClass::kRealTime) {
      if (e.arrival_time < 0) {
        throw ParseError("RT arrival must be nonnegative", i + 1);
      }
      if (e.arrival_time < last_rt) {
        throw ParseError("RT arrivals must be nondecreasing", i + 1);
      }
      last_rt = e.arrival_time;
    }
    trace.entries.push_back(e);
  }
  return trace;
}

Trace load_trace(const std::string& path) { return parse_trace_csv(detail::read_file(path)); }

void save_trace(const std::string& path, const Trace& trace) {
  detail::write_file(path, trace_to_csv(trace));
}

LengthStats length_stats(const Trace& trace, RequestClass cls) {
  LengthStats s;
  double sp = 0, sp2 = 0, so = 0, so2 = 0;
  for (const auto& e : trace.entries) {
    if (e.cls != cls) {
      continue;
    }
    ++s.count;
    sp += e.prompt_len;
    sp2 += static_cast<double>(e.prompt_len) * e.prompt_len;
    so += e.output_len;
    so2 += static_cast<double>(e.output_len) * e.output_len;
  }
  if (s.count == 0) {
    return s;
  }
  const double n = static_cast<double>(s.count);
  s.avg_prompt = sp / n;
  s.avg_output = so / n;
  s.std_prompt = std::sqrt(std::max(0.0, sp2 / n - s.avg_prompt * s.avg_prompt));
  s.std_output = std::sqrt(std::max(0.0, so2 / n - s.avg_output * s.avg_output));
  return s;
}

}  // namespace rtbe
