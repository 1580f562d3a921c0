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

#include "rtbe/cost_model.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <json.hpp>

#include <fmt/format.h>

#include "io_util.h"
#include "rtbe/errors.h"

namespace rtbe {

namespace {

Micros round_half_up(double value) {
  return static_cast<Micros>(std::floor(value + 0.5));
}

struct Residuals {
  double rms = 0.0;
  double max = 0.0;
};

template <typename Predict>
Residuals residuals_of(const std::vector<ProfileSample>& samples, Predict predict) {
  Residuals r;
  if (samples.empty()) {
    return r;
  }
  double sq = 0.0;
  for (const auto& s : samples) {
    const double err = predict(s) - s.latency_us;
    sq += err * err;
    r.max = std::max(r.max, std::abs(err));
  }
  r.rms = std::sqrt(sq / static_cast<double>(samples.size()));
  return r;
}

// Solves min |X b - y| with per-column scaling so that l_n * l_a (often
// 1e6 or more) does not swamp the intercept column in the rank test.
Eigen::VectorXd scaled_least_squares(Eigen::MatrixXd x, const Eigen::VectorXd& y) {
  Eigen::VectorXd scale(x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double m = x.col(c).cwiseAbs().maxCoeff();
    scale(c) = m > 0.0 ? m : 1.0;
    x.col(c) /= scale(c);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < x.cols()) {
    throw FitError(fmt::format("design matrix is rank deficient (rank {} of {})", qr.rank(),
                               x.cols()));
  }
  Eigen::VectorXd b = qr.solve(y);
  return b.cwiseQuotient(scale);
}

const char* kind_name(ProfileKind kind) {
  switch (kind) {
    case ProfileKind::kPrefill:
      return "prefill";
    case ProfileKind::kDecode:
      return "decode";
    case ProfileKind::kSwap:
      return "swap";
  }
  return "?";
}

}  // namespace

Micros LatencyModel::predict(std::int64_t l_n, std::int64_t l_a) const {
  return round_half_up(evaluate(static_cast<double>(l_n), static_cast<double>(l_a)));
}

Micros LatencyModel::predict_batch(std::int64_t sum_n, std::int64_t sum_na) const {
  return round_half_up(alpha0 * static_cast<double>(sum_n) +
                       alpha1 * static_cast<double>(sum_na) + beta);
}

Micros SwapModel::predict(std::int64_t blocks) const {
  if (blocks <= 0) {
    return 0;
  }
  return round_half_up(per_block * static_cast<double>(blocks) + fixed);
}

CostModels default_cost_models() {
  CostModels m;
  m.prefill = LatencyModel{35.0, 0.02, 8000.0};
  m.decode = LatencyModel{25.0, 0.004, 12000.0};
  m.swap = SwapModel{150.0, 500.0};
  return m;
}

BatchEntry batch_entry_for(const Request& req) {
  if (req.needs_prefill) {
    return BatchEntry{ExecPhase::kPrefill, req.context_len, req.context_len};
  }
  return BatchEntry{ExecPhase::kDecode, 1, req.context_len};
}

Micros predict_iteration(std::span<const BatchEntry> batch, std::int64_t m_cpu_total,
                         const CostModels& models) {
  std::int64_t n[2] = {0, 0};
  std::int64_t na[2] = {0, 0};
  bool any[2] = {false, false};
  for (const auto& e : batch) {
    const int k = e.phase == ExecPhase::kPrefill ? 0 : 1;
    n[k] += e.l_n;
    na[k] += e.l_n * e.l_a;
    any[k] = true;
  }
  Micros t_exec = 0;
  if (any[0]) {
    t_exec += models.prefill.predict_batch(n[0], na[0]);
  }
  if (any[1]) {
    t_exec += models.decode.predict_batch(n[1], na[1]);
  }
  return std::max(t_exec, models.swap.predict(m_cpu_total));
}

void BatchCostAccumulator::apply(Sums& sums, const BatchEntry& entry, std::int64_t m_cpu,
                                 int sign) {
  if (entry.phase == ExecPhase::kPrefill) {
    sums.prefill_n += sign * entry.l_n;
    sums.prefill_na += sign * entry.l_n * entry.l_a;
    sums.prefill_count += sign;
  } else {
    sums.decode_n += sign * entry.l_n;
    sums.decode_na += sign * entry.l_n * entry.l_a;
    sums.decode_count += sign;
  }
  sums.m_cpu += sign * m_cpu;
}

void BatchCostAccumulator::add(const BatchEntry& entry, std::int64_t m_cpu) {
  apply(sums_, entry, m_cpu, +1);
  ++count_;
}

void BatchCostAccumulator::remove(const BatchEntry& entry, std::int64_t m_cpu) {
  apply(sums_, entry, m_cpu, -1);
  --count_;
  if (count_ < 0 || sums_.prefill_count < 0 || sums_.decode_count < 0) {
    throw ContractViolation("removed an entry that was never added");
  }
}

Micros BatchCostAccumulator::evaluate(const Sums& sums) const {
  Micros t_exec = 0;
  if (sums.prefill_count > 0) {
    t_exec += models_->prefill.predict_batch(sums.prefill_n, sums.prefill_na);
  }
  if (sums.decode_count > 0) {
    t_exec += models_->decode.predict_batch(sums.decode_n, sums.decode_na);
  }
  return std::max(t_exec, models_->swap.predict(sums.m_cpu));
}

Micros BatchCostAccumulator::estimate() const { return evaluate(sums_); }

Micros BatchCostAccumulator::estimate_with(const BatchEntry& entry, std::int64_t m_cpu) const {
  Sums trial = sums_;
  apply(trial, entry, m_cpu, +1);
  return evaluate(trial);
}

Micros update_t_avg(Micros prev, Micros observed, double decay) {
  if (observed < 0) {
    throw ContractViolation("observed iteration time must be nonnegative");
  }
  if (prev == 0) {
    return observed;
  }
  return round_half_up(decay * static_cast<double>(prev) +
                       (1.0 - decay) * static_cast<double>(observed));
}

LatencyModel fit_latency(std::span<const ProfileSample> samples) {
  if (samples.size() < 3) {
    throw FitError(fmt::format("need at least 3 samples, got {}", samples.size()));
  }
  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    const double ln = static_cast<double>(s.l_n);
    x(i, 0) = ln;
    x(i, 1) = ln * static_cast<double>(s.l_a);
    x(i, 2) = 1.0;
    y(i) = s.latency_us;
  }
  const Eigen::VectorXd b = scaled_least_squares(std::move(x), y);
  return LatencyModel{std::max(0.0, b(0)), std::max(0.0, b(1)), std::max(0.0, b(2))};
}

SwapModel fit_swap(std::span<const ProfileSample> samples) {
  if (samples.size() < 2) {
    throw FitError(fmt::format("need at least 2 swap samples, got {}", samples.size()));
  }
  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    x(i, 0) = static_cast<double>(s.l_n);
    x(i, 1) = 1.0;
    y(i) = s.latency_us;
  }
  const Eigen::VectorXd b = scaled_least_squares(std::move(x), y);
  return SwapModel{std::max(0.0, b(0)), std::max(0.0, b(1))};
}

FitReport fit_models(std::span<const ProfileSample> samples) {
  std::vector<ProfileSample> prefill, decode, swap;
  for (const auto& s : samples) {
    switch (s.kind) {
      case ProfileKind::kPrefill:
        prefill.push_back(s);
        break;
      case ProfileKind::kDecode:
        decode.push_back(s);
        break;
      case ProfileKind::kSwap:
        swap.push_back(s);
        break;
    }
  }
  FitReport report;
  report.prefill_samples = prefill.size();
  report.decode_samples = decode.size();
  report.swap_samples = swap.size();
  try {
    report.models.prefill = fit_latency(prefill);
  } catch (const FitError& e) {
    throw FitError(std::string("prefill: ") + e.what());
  }
  try {
    report.models.decode = fit_latency(decode);
  } catch (const FitError& e) {
    throw FitError(std::string("decode: ") + e.what());
  }
  if (!swap.empty()) {
    try {
      report.models.swap = fit_swap(swap);
    } catch (const FitError& e) {
      throw FitError(std::string("swap: ") + e.what());
    }
  }
  const auto& m = report.models;
  auto r = residuals_of(prefill, [&](const ProfileSample& s) {
    return m.prefill.evaluate(static_cast<double>(s.l_n), static_cast<double>(s.l_a));
  });
  report.prefill_rms = r.rms;
  report.prefill_max = r.max;
  r = residuals_of(decode, [&](const ProfileSample& s) {
    return m.decode.evaluate(static_cast<double>(s.l_n), static_cast<double>(s.l_a));
  });
  report.decode_rms = r.rms;
  report.decode_max = r.max;
  r = residuals_of(swap, [&](const ProfileSample& s) {
    return m.swap.per_block * static_cast<double>(s.l_n) + m.swap.fixed;
  });
  report.swap_rms = r.rms;
  report.swap_max = r.max;
  return report;
}

std::vector<ProfileSample> synthesize_profile(const CostModels& truth, std::int64_t max_len,
                                              double noise, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(-noise, noise);
  auto noisy = [&](double v) { return noise > 0.0 ? v * (1.0 + jitter(rng)) : v; };

  std::vector<std::int64_t> lens;
  for (std::int64_t l = 1; l <= max_len; l *= 2) {
    lens.push_back(l);
  }
  std::vector<ProfileSample> out;
  for (std::int64_t l : lens) {
    out.push_back({ProfileKind::kPrefill, l, l,
                   noisy(truth.prefill.evaluate(static_cast<double>(l), static_cast<double>(l)))});
  }
  // Decode: a uniform batch of `batch` sequences at context `ctx` feeds one
  // token each, so l_n = batch and l_n * l_a = batch * ctx.
  for (std::int64_t batch : lens) {
    for (std::int64_t ctx : lens) {
      if (batch * ctx > max_len * 64) {
        continue;
      }
      out.push_back({ProfileKind::kDecode, batch, ctx,
                     noisy(truth.decode.evaluate(static_cast<double>(batch),
                                                 static_cast<double>(ctx)))});
    }
  }
  for (std::int64_t blocks = 1; blocks <= 1024; blocks *= 2) {
    out.push_back({ProfileKind::kSwap, blocks, 0,
                   noisy(truth.swap.per_block * static_cast<double>(blocks) + truth.swap.fixed)});
  }
  return out;
}

std::vector<ProfileSample> load_profile_csv(const std::string& path) {
  const std::string text = detail::read_file(path);
  const auto lines = detail::split_lines(text);
  if (lines.empty() || detail::trim(lines[0]) != "phase,l_n,l_a,latency_us") {
    throw ParseError("expected header phase,l_n,l_a,latency_us", 1);
  }
  std::vector<ProfileSample> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (detail::trim(lines[i]).empty()) {
      continue;
    }
    const auto f = detail::split_line(lines[i]);
    if (f.size() != 4) {
      throw ParseError("expected 4 fields", i + 1);
    }
    ProfileSample s;
    const auto phase = detail::trim(f[0]);
    if (phase == "prefill") {
      s.kind = ProfileKind::kPrefill;
    } else if (phase == "decode") {
      s.kind = ProfileKind::kDecode;
    } else if (phase == "swap") {
      s.kind = ProfileKind::kSwap;
    } else {
      throw ParseError("unknown phase '" + std::string(phase) + "'", i + 1);
    }
    if (!detail::parse_number(f[1], s.l_n) || !detail::parse_number(f[2], s.l_a) ||
        !detail::parse_number(f[3], s.latency_us)) {
      throw ParseError("malformed number", i + 1);
    }
    if (s.l_n < 0 || s.l_a < 0 || s.latency_us < 0) {
      throw ParseError("negative value", i + 1);
    }
    if (s.kind == ProfileKind::kPrefill && s.l_a < s.l_n) {
      throw ParseError("prefill sample needs l_a >= l_n", i + 1);
    }
    out.push_back(s);
  }
  return out;
}

void save_profile_csv(const std::string& path, std::span<const ProfileSample> samples) {
  std::string out = "phase,l_n,l_a,latency_us\n";
  for (const auto& s : samples) {
    out += fmt::format("{},{},{},{:.6f}\n", kind_name(s.kind), s.l_n, s.l_a, s.latency_us);
  }
  detail::write_file(path, out);
}

std::string models_to_json(const CostModels& m) {
  nlohmann::ordered_json j;
  j["prefill"] = {{"alpha0", m.prefill.alpha0}, {"alpha1", m.prefill.alpha1},
                  {"beta", m.prefill.beta}};
  j["decode"] = {{"alpha0", m.decode.alpha0}, {"alpha1", m.decode.alpha1},
                 {"beta", m.decode.beta}};
  j["swap"] = {{"per_block", m.swap.per_block}, {"fixed", m.swap.fixed}};
  return j.dump(2) + "\n";
}

CostModels models_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid model JSON: ") + e.what(), 0);
  }
  auto number = [](const nlohmann::json& obj, const char* section, const char* key) {
    if (!obj.contains(section) || !obj[section].contains(key) ||
        !obj[section][key].is_number()) {
      throw FitError(fmt::format("model JSON lacks numeric {}.{}", section, key));
    }
    const double v = obj[section][key].get<double>();
    if (v < 0.0) {
      throw FitError(fmt::format("model coefficient {}.{} is negative", section, key));
    }
    return v;
  };
  CostModels m;
  m.prefill = {number(j, "prefill", "alpha0"), number(j, "prefill", "alpha1"),
               number(j, "prefill", "beta")};
  m.decode = {number(j, "decode", "alpha0"), number(j, "decode", "alpha1"),
              number(j, "decode", "beta")};
  m.swap = {number(j, "swap", "per_block"), number(j, "swap", "fixed")};
  return m;
}

CostModels load_models_json(const std::string& path) {
  return models_from_json(detail::read_file(path));
}

void save_models_json(const std::string& path, const CostModels& models) {
  detail::write_file(path, models_to_json(models));
}

}  // namespace rtbe
