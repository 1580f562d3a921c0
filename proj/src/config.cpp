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

#include "rtbe/config.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <set>

#include <yaml-cpp/yaml.h>

#include "io_util.h"
#include "rtbe/errors.h"

namespace rtbe {

namespace fs = std::filesystem;

namespace {

// Typos in a config silently falling back to defaults are worse than a
// hard failure, so every mapping is checked against its known keys.
void expect_keys(const YAML::Node& node, const std::string& where,
                 const std::set<std::string>& allowed) {
  if (!node.IsMap()) {
    throw ConfigError(where + " must be a mapping");
  }
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out) {
  if (const auto v = node[key]) {
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(std::string("bad value for '") + key + "'");
    }
  }
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  fs::path p(path);
  if (p.is_relative()) {
    p = fs::path(base_dir) / p;
  }
  if (!fs::exists(p)) {
    throw ConfigError("referenced file does not exist: " + p.string());
  }
  return p.lexically_normal().string();
}

LatencyModel read_latency(const YAML::Node& node, const std::string& where) {
  expect_keys(node, where, {"alpha0", "alpha1", "beta"});
  LatencyModel m;
  read(node, "alpha0", m.alpha0);
  read(node, "alpha1", m.alpha1);
  read(node, "beta", m.beta);
  return m;
}

void read_models(const YAML::Node& node, const std::string& base_dir, ExperimentConfig& cfg) {
  expect_keys(node, "models", {"file", "prefill", "decode", "swap"});
  if (node["file"]) {
    if (node["prefill"] || node["decode"] || node["swap"]) {
      throw ConfigError("models takes either a file or inline coefficients, not both");
    }
    cfg.models_file = resolve(base_dir, node["file"].as<std::string>());
    cfg.models = load_models_json(cfg.models_file);
    return;
  }
  if (node["prefill"]) {
    cfg.models.prefill = read_latency(node["prefill"], "models.prefill");
  }
  if (node["decode"]) {
    cfg.models.decode = read_latency(node["decode"], "models.decode");
  }
  if (const auto s = node["swap"]) {
    expect_keys(s, "models.swap", {"per_block", "fixed"});
    read(s, "per_block", cfg.models.swap.per_block);
    read(s, "fixed", cfg.models.swap.fixed);
  }
}

void read_range(const YAML::Node& node, const char* key, int& lo, int& hi) {
  if (const auto v = node[key]) {
    if (!v.IsSequence() || v.size() != 2) {
      throw ConfigError(std::string(key) + " must be a [lo, hi] pair");
    }
    lo = v[0].as<int>();
    hi = v[1].as<int>();
  }
}

void read_workload(const YAML::Node& node, const std::string& base_dir, WorkloadSpec& w) {
  expect_keys(node, "workload",
              {"rt_length_file", "lognormal", "be_prompt", "be_output", "be_batch_size", "be_waves",
               "max_rt_requests"});
  if (const auto f = node["rt_length_file"]) {
    const auto path = f.as<std::string>();
    w.rt_length_file = path.empty() ? "" : resolve(base_dir, path);
  }
  if (const auto ln = node["lognormal"]) {
    expect_keys(ln, "workload.lognormal",
                {"prompt_mu", "prompt_sigma", "output_mu", "output_sigma", "max_len"});
    read(ln, "prompt_mu", w.lognormal.prompt_mu);
    read(ln, "prompt_sigma", w.lognormal.prompt_sigma);
    read(ln, "output_mu", w.lognormal.output_mu);
    read(ln, "output_sigma", w.lognormal.output_sigma);
    read(ln, "max_len", w.lognormal.max_len);
  }
  read_range(node, "be_prompt", w.be_prompt_lo, w.be_prompt_hi);
  read_range(node, "be_output", w.be_output_lo, w.be_output_hi);
  read(node, "be_batch_size", w.be_batch_size);
  read(node, "be_waves", w.be_waves);
  read(node, "max_rt_requests", w.max_rt_requests);
}

}  // namespace

void ExperimentConfig::validate() const {
  if (schedulers.empty()) {
    throw ConfigError("at least one scheduler is required");
  }
  if (rates.empty()) {
    throw ConfigError("at least one rate is required");
  }
  for (double r : rates) {
    if (!(r > 0.0)) {
      throw ConfigError("rates must be positive");
    }
  }
  if (!(horizon_s > 0.0)) {
    throw ConfigError("horizon_s must be positive");
  }
  try {
    slo.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  sim_config(schedulers.front()).validate();
  workload_for(rates.front()).validate();
}

SimConfig ExperimentConfig::sim_config(SchedulerKind kind) const {
  SimConfig c;
  c.scheduler = scheduler;
  c.scheduler.kind = kind;
  c.slo = slo;
  c.pool = pool;
  c.models = models;
  c.horizon = static_cast<Micros>(std::llround(horizon_s * 1e6));
  c.overhead_us = overhead_us;
  c.seed = seed;
  c.check_invariants = check_invariants;
  return c;
}

WorkloadSpec ExperimentConfig::workload_for(double rate) const {
  WorkloadSpec w = workload;
  w.rt_rate = rate;
  w.duration_s = horizon_s;
  w.seed = seed;
  return w;
}

ExperimentConfig parse_config(const std::string& yaml_text, const std::string& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::ParserException& e) {
    throw ParseError(std::string("invalid YAML: ") + e.msg,
                     static_cast<std::size_t>(e.mark.line + 1));
  }
  ExperimentConfig cfg;
  if (!root || root.IsNull()) {
    cfg.validate();
    return cfg;
  }
  expect_keys(root, "config",
              {"seed", "horizon_s", "output_dir", "write_logs", "check_invariants", "schedulers",
               "rates", "slo", "pool", "models", "scheduler", "workload"});
  read(root, "seed", cfg.seed);
  read(root, "horizon_s", cfg.horizon_s);
  read(root, "output_dir", cfg.output_dir);
  read(root, "write_logs", cfg.write_logs);
  read(root, "check_invariants", cfg.check_invariants);
  if (const auto s = root["schedulers"]) {
    cfg.schedulers.clear();
    for (const auto& name : s) {
      cfg.schedulers.push_back(parse_scheduler_kind(name.as<std::string>()));
    }
  }
  read(root, "rates", cfg.rates);
  if (const auto s = root["slo"]) {
    expect_keys(s, "slo", {"ttft_us", "tpot_us", "token_group_size"});
    read(s, "ttft_us", cfg.slo.ttft_target);
    read(s, "tpot_us", cfg.slo.tpot_target);
    read(s, "token_group_size", cfg.slo.token_group_size);
  }
  if (const auto p = root["pool"]) {
    expect_keys(p, "pool", {"num_blocks", "slots_per_block", "bidirectional"});
    read(p, "num_blocks", cfg.pool.num_blocks);
    read(p, "slots_per_block", cfg.pool.slots_per_block);
    read(p, "bidirectional", cfg.pool.bidirectional);
  }
  if (const auto m = root["models"]) {
    read_models(m, base_dir, cfg);
  }
  if (const auto s = root["scheduler"]) {
    expect_keys(s, "scheduler",
                {"b_base", "b_max", "baseline_cap", "t_avg_decay", "overhead_us", "late_relief",
                 "be_headroom"});
    read(s, "b_base", cfg.scheduler.b_base);
    read(s, "b_max", cfg.scheduler.b_max);
    read(s, "baseline_cap", cfg.scheduler.baseline_cap);
    read(s, "t_avg_decay", cfg.scheduler.t_avg_decay);
    read(s, "overhead_us", cfg.overhead_us);
    read(s, "late_relief", cfg.scheduler.packing.late_relief);
    read(s, "be_headroom", cfg.scheduler.packing.be_headroom);
  }
  if (const auto w = root["workload"]) {
    read_workload(w, base_dir, cfg.workload);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  const std::string text = detail::read_file(path);
  const auto base = fs::path(path).parent_path().string();
  return parse_config(text, base.empty() ? "." : base);
}

std::string default_data_path(const std::string& file) {
  return (fs::path(RTBE_DATA_DIR) / file).string();
}

ExperimentConfig default_config() { return load_config(default_data_path("default_config.yaml")); }

std::string resolve_output_dir(const ExperimentConfig& config) {
  if (const char* root = std::getenv("RTBE_OUTPUT_ROOT"); root && *root) {
    return root;
  }
  return config.output_dir;
}

}  // namespace rtbe
