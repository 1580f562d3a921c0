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

#include "rtbe/experiment.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "io_util.h"

namespace rtbe {

RunResult run_cell(const ExperimentConfig& config, SchedulerKind kind, const Trace& trace) {
  Simulator sim(config.sim_config(kind), trace);
  sim.run();
  RunResult out;
  out.log = sim.take_log();
  out.metrics = compute_metrics(out.log, trace, config.slo);
  return out;
}

std::string cell_name(SchedulerKind kind, double rate) {
  return fmt::format("{}_r{}", to_string(kind), rate);
}

std::vector<CellSummary> run_sweep(const ExperimentConfig& config, const SweepOptions& options) {
  config.validate();
  std::vector<Trace> traces;
  traces.reserve(config.rates.size());
  for (double rate : config.rates) {
    traces.push_back(generate_trace(config.workload_for(rate)));
  }

  std::vector<CellSummary> cells;
  std::vector<std::size_t> trace_of;
  for (std::size_t r = 0; r < config.rates.size(); ++r) {
    for (auto kind : config.schedulers) {
      CellSummary c;
      c.kind = kind;
      c.rate = config.rates[r];
      cells.push_back(c);
      trace_of.push_back(r);
    }
  }

  if (!options.output_dir.empty()) {
    for (std::size_t r = 0; r < config.rates.size(); ++r) {
      const auto path = std::filesystem::path(options.output_dir) /
                        fmt::format("trace_r{}.csv", config.rates[r]);
      save_trace(path.string(), traces[r]);
    }
  }

  // Cells are independent and write distinct files; the caller joins
  // before building tables.
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        auto& c = cells[i];
        RunResult res = run_cell(config, c.kind, traces[trace_of[i]]);
        c.digest = res.log.digest();
        c.metrics = std::move(res.metrics);
        if (!options.output_dir.empty()) {
          const auto stem = std::filesystem::path(options.output_dir) / cell_name(c.kind, c.rate);
          detail::write_file(stem.string() + ".jsonl", res.log.to_jsonl());
          export_report(c.metrics, ReportFormat::kJson, stem.string() + ".json");
        }
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) {
          failure = std::current_exception();
        }
        next = cells.size();
      }
    }
  };
  const int jobs = std::clamp<int>(options.jobs, 1, static_cast<int>(cells.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) {
      pool.emplace_back(worker);
    }
    for (auto& t : pool) {
      t.join();
    }
  }
  if (failure) {
    std::rethrow_exception(failure);
  }

  if (!options.output_dir.empty()) {
    std::map<SchedulerKind, std::vector<std::pair<double, MetricsReport>>> by_kind;
    for (const auto& c : cells) {
      by_kind[c.kind].emplace_back(c.rate, c.metrics);
    }
    for (const auto& [kind, rows] : by_kind) {
      write_plot_data(options.output_dir, std::string(to_string(kind)), rows);
    }
    detail::write_file((std::filesystem::path(options.output_dir) / "comparison.csv").string(),
                       comparison_csv(cells));
  }
  return cells;
}

std::string comparison_table(const std::vector<CellSummary>& cells) {
  std::string out = fmt::format("{:>6} {:>8} {:>14} {:>9} {:>9} {:>10} {:>10} {:>8} {:>8}\n",
                                "rate", "sched", "norm_lat_ms", "ttft_att", "tpot_att",
                                "be_req/s", "be_tok/s", "rt_done", "rt_open");
  for (const auto& c : cells) {
    const auto& m = c.metrics;
    out += fmt::format("{:>6} {:>8} {:>14.3f} {:>9.4f} {:>9.4f} {:>10.4f} {:>10.2f} {:>8} {:>8}\n",
                       c.rate, to_string(c.kind), m.mean_normalized_latency / 1000.0,
                       m.ttft_attainment, m.tpot_attainment, m.be_throughput_rps,
                       m.be_throughput_tps, m.rt_finished, m.rt_unfinished);
  }
  return out;
}

std::string comparison_csv(const std::vector<CellSummary>& cells) {
  std::string out =
      "rate,scheduler,mean_normalized_latency_us,ttft_attainment,tpot_attainment,"
      "be_throughput_rps,be_throughput_tps,rt_finished,rt_unfinished,digest\n";
  for (const auto& c : cells) {
    const auto& m = c.metrics;
    out += fmt::format("{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{},{},{}\n", c.rate,
                       to_string(c.kind), m.mean_normalized_latency, m.ttft_attainment,
                       m.tpot_attainment, m.be_throughput_rps, m.be_throughput_tps,
                       m.rt_finished, m.rt_unfinished, c.digest);
  }
  return out;
}

}  // namespace rtbe
