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

// Command line driver: fit, gen, simulate, compare and report.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "rtbe/config.h"
#include "rtbe/cost_model.h"
#include "rtbe/errors.h"
#include "rtbe/experiment.h"
#include "rtbe/metrics.h"
#include "rtbe/sim_engine.h"
#include "rtbe/workload.h"

namespace fs = std::filesystem;
using namespace rtbe;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitFit = 3;
constexpr int kExitSim = 4;

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> horizon_s;
  std::vector<std::string> schedulers;
  std::vector<double> rates;
};

void add_override_flags(CLI::App* cmd, Overrides& o, bool with_scheduler) {
  cmd->add_option("-c,--config", o.config_path, "experiment YAML (default: shipped config)");
  cmd->add_option("--seed", o.seed, "override the config seed");
  cmd->add_option("--horizon-s", o.horizon_s, "override the simulated horizon in seconds");
  cmd->add_option("--rate", o.rates, "RT arrival rate(s) per second, replacing the config list");
  if (with_scheduler) {
    cmd->add_option("--scheduler", o.schedulers, "scheduler(s): packing, fcfs, rr");
  }
}

ExperimentConfig resolve_config(const Overrides& o) {
  ExperimentConfig cfg = o.config_path.empty() ? default_config() : load_config(o.config_path);
  if (o.seed) {
    cfg.seed = *o.seed;
  }
  if (o.horizon_s) {
    cfg.horizon_s = *o.horizon_s;
  }
  if (!o.rates.empty()) {
    cfg.rates = o.rates;
  }
  if (!o.schedulers.empty()) {
    cfg.schedulers.clear();
    for (const auto& s : o.schedulers) {
      cfg.schedulers.push_back(parse_scheduler_kind(s));
    }
  }
  cfg.validate();
  return cfg;
}

void print_stats(const Trace& trace) {
  fmt::print("{:>6} {:>8} {:>12} {:>12} {:>12} {:>12}\n", "class", "count", "avg_prompt",
             "std_prompt", "avg_output", "std_output");
  for (auto cls : {RequestClass::kRealTime, RequestClass::kBestEffort}) {
    const auto s = length_stats(trace, cls);
    fmt::print("{:>6} {:>8} {:>12.2f} {:>12.2f} {:>12.2f} {:>12.2f}\n", to_string(cls), s.count,
               s.avg_prompt, s.std_prompt, s.avg_output, s.std_output);
  }
}

int cmd_fit(const std::string& profile, const std::string& out, bool synthesize, double noise,
            std::uint64_t seed) {
  if (synthesize) {
    std::mt19937_64 rng(seed);
    const auto samples = synthesize_profile(default_cost_models(), 2048, noise, rng);
    save_profile_csv(profile, samples);
    fmt::print("wrote {} synthetic samples to {}\n", samples.size(), profile);
  }
  const auto samples = load_profile_csv(profile);
  const FitReport rep = fit_models(samples);
  const auto& m = rep.models;
  fmt::print("{:>8} {:>8} {:>12} {:>12} {:>14} {:>12} {:>12}\n", "model", "samples", "alpha0",
             "alpha1", "beta", "rms_us", "max_us");
  fmt::print("{:>8} {:>8} {:>12.6f} {:>12.6f} {:>14.3f} {:>12.3f} {:>12.3f}\n", "prefill",
             rep.prefill_samples, m.prefill.alpha0, m.prefill.alpha1, m.prefill.beta,
             rep.prefill_rms, rep.prefill_max);
  fmt::print("{:>8} {:>8} {:>12.6f} {:>12.6f} {:>14.3f} {:>12.3f} {:>12.3f}\n", "decode",
             rep.decode_samples, m.decode.alpha0, m.decode.alpha1, m.decode.beta, rep.decode_rms,
             rep.decode_max);
  fmt::print("{:>8} {:>8} {:>12.6f} {:>12} {:>14.3f} {:>12.3f} {:>12.3f}\n", "swap",
             rep.swap_samples, m.swap.per_block, "-", m.swap.fixed, rep.swap_rms, rep.swap_max);
  save_models_json(out, m);
  fmt::print("models written to {}\n", out);
  return 0;
}

int cmd_gen(const Overrides& o, const std::string& out) {
  const auto cfg = resolve_config(o);
  const Trace trace = generate_trace(cfg.workload_for(cfg.rates.front()));
  save_trace(out, trace);
  fmt::print("trace with {} requests written to {}\n", trace.entries.size(), out);
  print_stats(trace);
  return 0;
}

int cmd_simulate(const Overrides& o, const std::string& trace_path, const std::string& out_dir) {
  const auto cfg = resolve_config(o);
  const auto kind = cfg.schedulers.front();
  const double rate = cfg.rates.front();
  const Trace trace =
      trace_path.empty() ? generate_trace(cfg.workload_for(rate)) : load_trace(trace_path);
  const RunResult res = run_cell(cfg, kind, trace);
  const auto dir = out_dir.empty() ? resolve_output_dir(cfg) : out_dir;
  const auto stem = (fs::path(dir) / cell_name(kind, rate)).string();
  {
    std::ofstream f;
    fs::create_directories(dir);
    f.open(stem + ".jsonl", std::ios::binary);
    if (!f) {
      throw IoError("cannot write " + stem + ".jsonl");
    }
    f << res.log.to_jsonl();
  }
  export_report(res.metrics, ReportFormat::kJson, stem + ".json");
  export_report(res.metrics, ReportFormat::kCsv, stem + ".csv");
  std::vector<CellSummary> cells(1);
  cells[0].kind = kind;
  cells[0].rate = rate;
  cells[0].digest = res.log.digest();
  cells[0].metrics = res.metrics;
  fmt::print("{}", comparison_table(cells));
  fmt::print("iterations {}  end_clock_us {}  digest {}\n", res.log.records.size(),
             res.log.end_clock, cells[0].digest);
  fmt::print("outputs: {}.{{jsonl,json,csv}}\n", stem);
  return 0;
}

int cmd_compare(const Overrides& o, const std::string& out_dir, int jobs) {
  const auto cfg = resolve_config(o);
  SweepOptions opts;
  opts.jobs = jobs;
  opts.output_dir = out_dir.empty() ? resolve_output_dir(cfg) : out_dir;
  const auto cells = run_sweep(cfg, opts);
  fmt::print("{}", comparison_table(cells));
  fmt::print("comparison table, plot data and per-cell reports in {}\n", opts.output_dir);
  return 0;
}

int cmd_report(const std::string& log_path, const std::string& trace_path, int group_size,
               const std::string& format, const std::string& out) {
  std::ifstream f(log_path, std::ios::binary);
  if (!f) {
    throw IoError("cannot read " + log_path);
  }
  std::stringstream ss;
  ss << f.rdbuf();
  const EventLog log = EventLog::from_jsonl(ss.str());
  const Trace trace = load_trace(trace_path);
  SloConfig slo;
  slo.token_group_size = group_size > 0 ? group_size : log.token_group_size;
  const auto rep = compute_metrics(log, trace, slo);
  if (!out.empty()) {
    export_report(rep, format == "json" ? ReportFormat::kJson : ReportFormat::kCsv, out);
  }
  std::vector<CellSummary> cells(1);
  cells[0].kind = parse_scheduler_kind(log.scheduler);
  cells[0].metrics = rep;
  fmt::print("{}", comparison_table(cells));
  fmt::print("token group size {}  tpot groups judged per request, averaged over {} RT requests\n",
             slo.token_group_size, rep.requests.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete-event simulator for mixed real-time and best-effort LLM serving"};
  app.require_subcommand(1);

  std::string profile, models_out = "models.json";
  bool synthesize = false;
  double noise = 0.0;
  std::uint64_t fit_seed = 1;
  auto* fit = app.add_subcommand("fit", "fit latency and swap models to a profile CSV");
  fit->add_option("profile", profile, "CSV with phase,l_n,l_a,latency_us")->required();
  fit->add_option("-o,--out", models_out, "output models JSON");
  fit->add_flag("--synthesize", synthesize,
                "first write a synthetic profile from the default models to PROFILE");
  fit->add_option("--noise", noise, "multiplicative noise for --synthesize");
  fit->add_option("--seed", fit_seed, "RNG seed for --synthesize");

  Overrides gen_o;
  std::string trace_out = "trace.csv";
  auto* gen = app.add_subcommand("gen", "generate a workload trace");
  add_override_flags(gen, gen_o, false);
  gen->add_option("-o,--out", trace_out, "output trace CSV");

  Overrides sim_o;
  std::string sim_trace, sim_out;
  auto* sim = app.add_subcommand("simulate", "run one scheduler at one rate");
  add_override_flags(sim, sim_o, true);
  sim->add_option("--trace", sim_trace, "replay this trace instead of generating one");
  sim->add_option("-o,--out", sim_out, "output directory (default: config or $RTBE_OUTPUT_ROOT)");

  Overrides cmp_o;
  std::string cmp_out;
  int jobs = 1;
  auto* cmp = app.add_subcommand("compare", "sweep rates x schedulers and tabulate");
  add_override_flags(cmp, cmp_o, true);
  cmp->add_option("-o,--out", cmp_out, "output directory (default: config or $RTBE_OUTPUT_ROOT)");
  cmp->add_option("-j,--jobs", jobs, "cells to run concurrently")->check(CLI::PositiveNumber);

  std::string rep_log, rep_trace, rep_format = "csv", rep_out;
  int group_size = 0;
  auto* report = app.add_subcommand("report", "recompute metrics from a saved event log");
  report->add_option("log", rep_log, "event log JSONL from simulate or compare")->required();
  report->add_option("--trace", rep_trace, "trace the log was produced from")->required();
  report->add_option("--group-size", group_size, "judge TPOT with this token group size");
  report->add_option("--format", rep_format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  report->add_option("-o,--out", rep_out, "write the report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*fit) {
      return cmd_fit(profile, models_out, synthesize, noise, fit_seed);
    }
    if (*gen) {
      return cmd_gen(gen_o, trace_out);
    }
    if (*sim) {
      return cmd_simulate(sim_o, sim_trace, sim_out);
    }
    if (*cmp) {
      return cmd_compare(cmp_o, cmp_out, jobs);
    }
    if (*report) {
      return cmd_report(rep_log, rep_trace, group_size, rep_format, rep_out);
    }
  } catch (const FitError& e) {
    std::fprintf(stderr, "fit error: %s\n", e.what());
    return kExitFit;
  } catch (const IoError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kExitInput;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kExitInput;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitInput;
  } catch (const Error& e) {
    std::fprintf(stderr, "simulation error: %s\n", e.what());
    return kExitSim;
  }
  return 0;
}
