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

#include "rtbe/metrics.h"

#include <algorithm>
#include <filesystem>
#include <json.hpp>

#include <fmt/format.h>

#include "io_util.h"
#include "rtbe/errors.h"

namespace rtbe {

namespace {

struct Trail {
  std::vector<Micros> emissions;
  Micros busy = 0;  // summed duration of iterations the request ran in
};

// Judges token groups after the first-token group. A group whose deadline
// passed before `observed_until` without completing counts as missed.
void judge_groups(RequestMetrics& m, const std::vector<Micros>& e, const SloConfig& slo,
                  Micros observed_until) {
  const int g = slo.token_group_size;
  int first = 1;  // 1-based index of the group's first token
  Micros start = m.arrival;
  bool first_group = true;
  while (first <= m.output_len) {
    const int size = std::min(g, m.output_len - first + 1);
    const int last = first + size - 1;
    const Micros budget = first_group ? slo.ttft_target : slo.tpot_target * size;
    const Micros deadline = start + budget;
    const bool complete = static_cast<int>(e.size()) >= last;
    if (!first_group) {
      if (complete) {
        ++m.tpot_groups;
        m.tpot_groups_met += e[last - 1] <= deadline ? 1 : 0;
      } else if (deadline < observed_until) {
        ++m.tpot_groups;
      }
    }
    if (!complete) {
      break;
    }
    start = e[last - 1];
    first = last + 1;
    first_group = false;
  }
  if (m.tpot_groups > 0) {
    m.tpot_attainment = static_cast<double>(m.tpot_groups_met) / m.tpot_groups;
  }
}

double mean(double sum, std::int64_t n) { return n > 0 ? sum / static_cast<double>(n) : 0.0; }

}  // namespace

MetricsReport compute_metrics(const EventLog& log, const Trace& trace, const SloConfig& slo) {
  slo.validate();
  MetricsReport rep;
  rep.scheduler = log.scheduler;
  rep.horizon = log.horizon;
  rep.token_group_size = slo.token_group_size;
  rep.iterations = static_cast<std::int64_t>(log.records.size());

  const std::size_t n = trace.entries.size();
  std::vector<Trail> trails(n);
  for (const auto& r : log.records) {
    const Micros dur = r.end - r.start;
    for (const auto* ids : {&r.rt_ids, &r.be_ids}) {
      for (RequestId id : *ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= n) {
          throw ConsistencyError(fmt::format("iteration {} names unknown request {}", r.index, id));
        }
        auto& t = trails[id];
        t.emissions.push_back(r.end);
        t.busy += dur;
        if (static_cast<int>(t.emissions.size()) > trace.entries[id].output_len) {
          throw ConsistencyError(fmt::format("request {} emitted more tokens than requested", id));
        }
      }
    }
  }

  const Micros observed_until = log.end_clock;
  double sum_norm = 0, sum_ttft = 0, sum_tpot = 0, sum_tpot_att = 0, sum_queue = 0;
  std::int64_t n_ttft = 0, n_tpot = 0, n_tpot_att = 0, ttft_obs = 0, ttft_met = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& entry = trace.entries[i];
    const auto& e = trails[i].emissions;
    if (entry.cls == RequestClass::kBestEffort) {
      rep.be_tokens += static_cast<std::int64_t>(e.size());
      rep.be_finished += static_cast<int>(e.size()) == entry.output_len ? 1 : 0;
      continue;
    }
    const Micros released = i < log.release_times.size() ? log.release_times[i] : -1;
    if (released < 0) {
      if (!e.empty()) {
        throw ConsistencyError(fmt::format("request {} ran before it arrived", i));
      }
      continue;  // never entered the system within the horizon
    }
    ++rep.rt_total;
    RequestMetrics m;
    m.id = static_cast<RequestId>(i);
    m.arrival = entry.arrival_time;
    m.output_len = entry.output_len;
    m.emitted = static_cast<int>(e.size());
    m.finished = m.emitted == m.output_len;
    if (!e.empty()) {
      if (e.front() < m.arrival) {
        throw ConsistencyError(fmt::format("request {} emitted before arrival", i));
      }
      m.ttft = e.front() - m.arrival;
      sum_ttft += static_cast<double>(m.ttft);
      ++n_ttft;
    }
    m.ttft_observable = !e.empty() || m.arrival + slo.ttft_target < observed_until;
    m.ttft_met = !e.empty() && m.ttft <= slo.ttft_target;
    if (m.ttft_observable) {
      ++ttft_obs;
      ttft_met += m.ttft_met ? 1 : 0;
    }
    if (e.size() >= 2) {
      m.mean_tpot = static_cast<double>(e.back() - e.front()) / static_cast<double>(e.size() - 1);
      sum_tpot += m.mean_tpot;
      ++n_tpot;
    }
    judge_groups(m, e, slo, observed_until);
    if (m.tpot_attainment >= 0.0) {
      sum_tpot_att += m.tpot_attainment;
      ++n_tpot_att;
    }
    if (m.finished) {
      ++rep.rt_finished;
      m.finish = e.back();
      const Micros e2e = m.finish - m.arrival;
      m.normalized_latency = static_cast<double>(e2e) / m.output_len;
      sum_norm += m.normalized_latency;
      m.queueing = e2e - trails[i].busy;
      m.queueing_proportion = e2e > 0 ? static_cast<double>(m.queueing) / e2e : 0.0;
      sum_queue += m.queueing_proportion;
    } else {
      ++rep.rt_unfinished;
    }
    rep.requests.push_back(m);
  }
  rep.mean_normalized_latency = mean(sum_norm, rep.rt_finished);
  rep.queueing_proportion = mean(sum_queue, rep.rt_finished);
  rep.mean_ttft = mean(sum_ttft, n_ttft);
  rep.mean_tpot = mean(sum_tpot, n_tpot);
  rep.ttft_attainment = mean(static_cast<double>(ttft_met), ttft_obs);
  rep.tpot_attainment = mean(sum_tpot_att, n_tpot_att);
  const double seconds = static_cast<double>(log.horizon) / 1e6;
  if (seconds > 0) {
    rep.be_throughput_rps = static_cast<double>(rep.be_finished) / seconds;
    rep.be_throughput_tps = static_cast<double>(rep.be_tokens) / seconds;
  }
  return rep;
}

namespace {

constexpr const char* kAggregateHeader =
    "scheduler,horizon_us,token_group_size,iterations,rt_total,rt_finished,rt_unfinished,"
    "mean_normalized_latency_us,mean_ttft_us,mean_tpot_us,ttft_attainment,tpot_attainment,"
    "be_finished,be_tokens,be_throughput_rps,be_throughput_tps,queueing_proportion";

constexpr const char* kRequestHeader =
    "id,arrival_us,output_len,emitted,finished,ttft_us,finish_us,mean_tpot_us,"
    "normalized_latency_us,ttft_observable,ttft_met,tpot_groups,tpot_groups_met,"
    "tpot_attainment,queueing_us,queueing_proportion";

std::string aggregate_row(const MetricsReport& r) {
  return fmt::format("{},{},{},{},{},{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{},{},{:.6f},{:.6f},{:.6f}",
                     r.scheduler, r.horizon, r.token_group_size, r.iterations, r.rt_total,
                     r.rt_finished, r.rt_unfinished, r.mean_normalized_latency, r.mean_ttft,
                     r.mean_tpot, r.ttft_attainment, r.tpot_attainment, r.be_finished,
                     r.be_tokens, r.be_throughput_rps, r.be_throughput_tps,
                     r.queueing_proportion);
}

nlohmann::ordered_json request_json(const RequestMetrics& m) {
  return {{"id", m.id},
          {"arrival", m.arrival},
          {"output_len", m.output_len},
          {"emitted", m.emitted},
          {"finished", m.finished},
          {"ttft", m.ttft},
          {"finish", m.finish},
          {"mean_tpot", m.mean_tpot},
          {"normalized_latency", m.normalized_latency},
          {"ttft_observable", m.ttft_observable},
          {"ttft_met", m.ttft_met},
          {"tpot_groups", m.tpot_groups},
          {"tpot_groups_met", m.tpot_groups_met},
          {"tpot_attainment", m.tpot_attainment},
          {"queueing", m.queueing},
          {"queueing_proportion", m.queueing_proportion}};
}

}  // namespace

std::string aggregate_csv(const std::vector<MetricsReport>& reports) {
  std::string out = std::string(kAggregateHeader) + "\n";
  for (const auto& r : reports) {
    out += aggregate_row(r) + "\n";
  }
  return out;
}

std::string requests_csv(const MetricsReport& report) {
  std::string out = std::string(kRequestHeader) + "\n";
  for (const auto& m : report.requests) {
    out += fmt::format("{},{},{},{},{},{},{},{:.3f},{:.3f},{},{},{},{},{:.6f},{},{:.6f}\n", m.id,
                       m.arrival, m.output_len, m.emitted, m.finished ? 1 : 0, m.ttft, m.finish,
                       m.mean_tpot, m.normalized_latency, m.ttft_observable ? 1 : 0,
                       m.ttft_met ? 1 : 0, m.tpot_groups, m.tpot_groups_met, m.tpot_attainment,
                       m.queueing, m.queueing_proportion);
  }
  return out;
}

std::string report_to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["scheduler"] = r.scheduler;
  j["horizon"] = r.horizon;
  j["token_group_size"] = r.token_group_size;
  j["iterations"] = r.iterations;
  j["rt_total"] = r.rt_total;
  j["rt_finished"] = r.rt_finished;
  j["rt_unfinished"] = r.rt_unfinished;
  j["be_finished"] = r.be_finished;
  j["be_tokens"] = r.be_tokens;
  j["mean_normalized_latency"] = r.mean_normalized_latency;
  j["mean_ttft"] = r.mean_ttft;
  j["mean_tpot"] = r.mean_tpot;
  j["ttft_attainment"] = r.ttft_attainment;
  j["tpot_attainment"] = r.tpot_attainment;
  j["be_throughput_rps"] = r.be_throughput_rps;
  j["be_throughput_tps"] = r.be_throughput_tps;
  j["queueing_proportion"] = r.queueing_proportion;
  auto reqs = nlohmann::ordered_json::array();
  for (const auto& m : r.requests) {
    reqs.push_back(request_json(m));
  }
  j["requests"] = std::move(reqs);
  return j.dump(2) + "\n";
}

MetricsReport report_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid report JSON: ") + e.what(), 0);
  }
  try {
    MetricsReport r;
    r.scheduler = j.at("scheduler").get<std::string>();
    r.horizon = j.at("horizon").get<Micros>();
    r.token_group_size = j.at("token_group_size").get<int>();
    r.iterations = j.at("iterations").get<std::int64_t>();
    r.rt_total = j.at("rt_total").get<std::int64_t>();
    r.rt_finished = j.at("rt_finished").get<std::int64_t>();
    r.rt_unfinished = j.at("rt_unfinished").get<std::int64_t>();
    r.be_finished = j.at("be_finished").get<std::int64_t>();
    r.be_tokens = j.at("be_tokens").get<std::int64_t>();
    r.mean_normalized_latency = j.at("mean_normalized_latency").get<double>();
    r.mean_ttft = j.at("mean_ttft").get<double>();
    r.mean_tpot = j.at("mean_tpot").get<double>();
    r.ttft_attainment = j.at("ttft_attainment").get<double>();
    r.tpot_attainment = j.at("tpot_attainment").get<double>();
    r.be_throughput_rps = j.at("be_throughput_rps").get<double>();
    r.be_throughput_tps = j.at("be_throughput_tps").get<double>();
    r.queueing_proportion = j.at("queueing_proportion").get<double>();
    for (const auto& q : j.at("requests")) {
      RequestMetrics m;
      m.id = q.at("id").get<RequestId>();
      m.arrival = q.at("arrival").get<Micros>();
      m.output_len = q.at("output_len").get<int>();
      m.emitted = q.at("emitted").get<int>();
      m.finished = q.at("finished").get<bool>();
      m.ttft = q.at("ttft").get<Micros>();
      m.finish = q.at("finish").get<Micros>();
      m.mean_tpot = q.at("mean_tpot").get<double>();
      m.normalized_latency = q.at("normalized_latency").get<double>();
      m.ttft_observable = q.at("ttft_observable").get<bool>();
      m.ttft_met = q.at("ttft_met").get<bool>();
      m.tpot_groups = q.at("tpot_groups").get<int>();
      m.tpot_groups_met = q.at("tpot_groups_met").get<int>();
      m.tpot_attainment = q.at("tpot_attainment").get<double>();
      m.queueing = q.at("queueing").get<Micros>();
      m.queueing_proportion = q.at("queueing_proportion").get<double>();
      r.requests.push_back(m);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report JSON is missing fields: ") + e.what(), 0);
  }
}

MetricsReport load_report_json(const std::string& path) {
  return report_from_json(detail::read_file(path));
}

void export_report(const MetricsReport& report, ReportFormat format, const std::string& path) {
  if (format == ReportFormat::kJson) {
    detail::write_file(path, report_to_json(report));
    return;
  }
  detail::write_file(path, aggregate_csv({report}));
  const std::filesystem::path p(path);
  const auto side = p.parent_path() / (p.stem().string() + "_requests" + p.extension().string());
  detail::write_file(side.string(), requests_csv(report));
}

std::vector<std::string> write_plot_data(const std::string& dir, const std::string& scheduler,
                                         const std::vector<std::pair<double, MetricsReport>>& rows) {
  struct Column {
    const char* name;
    double (*get)(const MetricsReport&);
  };
  static const Column columns[] = {
      {"normalized_latency", [](const MetricsReport& r) { return r.mean_normalized_latency; }},
      {"ttft_attainment", [](const MetricsReport& r) { return r.ttft_attainment; }},
      {"tpot_attainment", [](const MetricsReport& r) { return r.tpot_attainment; }},
      {"be_throughput", [](const MetricsReport& r) { return r.be_throughput_rps; }},
      {"be_token_throughput", [](const MetricsReport& r) { return r.be_throughput_tps; }},
  };
  std::vector<std::string> paths;
  for (const auto& c : columns) {
    std::string out = fmt::format("rate\t{}\n", c.name);
    for (const auto& [rate, rep] : rows) {
      out += fmt::format("{}\t{:.6f}\n", rate, c.get(rep));
    }
    const auto path = (std::filesystem::path(dir) / fmt::format("{}_{}.tsv", c.name, scheduler)).string();
    detail::write_file(path, out);
    paths.push_back(path);
  }
  return paths;
}

}  // namespace rtbe
