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

#include "rtbe/sim_engine.h"

#include <openssl/evp.h>

#include <algorithm>
#include <json.hpp>

#include <fmt/format.h>

#include "rtbe/errors.h"

namespace rtbe {

void SimConfig::validate() const {
  slo.validate();
  if (horizon <= 0) {
    throw ConfigError("horizon must be positive");
  }
  if (pool.num_blocks < 1 || pool.slots_per_block < 1) {
    throw ConfigError("pool needs at least one block of one slot");
  }
  if (overhead_us < 0) {
    throw ConfigError("overhead must be nonnegative");
  }
  if (scheduler.b_base < 1 || scheduler.b_max < scheduler.b_base || scheduler.baseline_cap < 1) {
    throw ConfigError("batch caps must satisfy 1 <= b_base <= b_max and baseline_cap >= 1");
  }
  if (!(scheduler.t_avg_decay >= 0.0 && scheduler.t_avg_decay < 1.0)) {
    throw ConfigError("t_avg_decay must lie in [0, 1)");
  }
}

namespace {

template <typename T>
nlohmann::ordered_json to_array(const std::vector<T>& v) {
  auto a = nlohmann::ordered_json::array();
  for (const auto& x : v) {
    a.push_back(x);
  }
  return a;
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx, md, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("SHA-256 digest failed");
  }
  EVP_MD_CTX_free(ctx);
  std::string hex;
  hex.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    hex += fmt::format("{:02x}", md[i]);
  }
  return hex;
}

}  // namespace

std::string EventLog::to_jsonl() const {
  nlohmann::ordered_json head;
  head["scheduler"] = scheduler;
  head["horizon"] = horizon;
  head["end_clock"] = end_clock;
  head["token_group_size"] = token_group_size;
  head["release_times"] = to_array(release_times);
  std::string out = head.dump() + "\n";
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["iteration"] = r.index;
    j["start"] = r.start;
    j["end"] = r.end;
    j["estimated"] = r.estimated;
    j["rt"] = to_array(r.rt_ids);
    j["be"] = to_array(r.be_ids);
    j["swap_blocks"] = r.swap_blocks;
    j["checkpoints"] = r.checkpoints;
    j["restores"] = r.restores;
    j["relocations"] = r.relocations;
    j["finished"] = to_array(r.finished);
    j["dropped"] = to_array(r.dropped);
    j["released_waves"] = to_array(r.released_waves);
    j["b_curr"] = r.b_curr;
    j["t_min_res"] = r.t_min_res == kInfiniteTime ? nlohmann::ordered_json(nullptr)
                                                   : nlohmann::ordered_json(r.t_min_res);
    j["raw_min_remaining"] = r.raw_min_remaining == kInfiniteTime
                                 ? nlohmann::ordered_json(nullptr)
                                 : nlohmann::ordered_json(r.raw_min_remaining);
    j["degenerate"] = r.degenerate;
    j["late_rt"] = r.late_rt;
    j["empty_blocks"] = r.empty_blocks;
    j["m_new"] = r.m_new_total;
    j["rt_k"] = to_array(r.rt_k);
    j["rt_remaining"] = to_array(r.rt_remaining);
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string EventLog::digest() const { return sha256_hex(to_jsonl()); }

EventLog EventLog::from_jsonl(const std::string& text) {
  EventLog log;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) {
      eol = text.size();
    }
    const std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.empty()) {
      continue;
    }
    try {
      const auto j = nlohmann::json::parse(line);
      if (line_no == 1) {
        log.scheduler = j.at("scheduler").get<std::string>();
        log.horizon = j.at("horizon").get<Micros>();
        log.end_clock = j.at("end_clock").get<Micros>();
        log.token_group_size = j.at("token_group_size").get<int>();
        log.release_times = j.at("release_times").get<std::vector<Micros>>();
        continue;
      }
      IterationRecord r;
      r.index = j.at("iteration").get<std::int64_t>();
      r.start = j.at("start").get<Micros>();
      r.end = j.at("end").get<Micros>();
      r.estimated = j.at("estimated").get<Micros>();
      r.rt_ids = j.at("rt").get<std::vector<RequestId>>();
      r.be_ids = j.at("be").get<std::vector<RequestId>>();
      r.swap_blocks = j.at("swap_blocks").get<int>();
      r.checkpoints = j.at("checkpoints").get<int>();
      r.restores = j.at("restores").get<int>();
      r.relocations = j.at("relocations").get<int>();
      r.finished = j.at("finished").get<std::vector<RequestId>>();
      r.dropped = j.at("dropped").get<std::vector<RequestId>>();
      r.released_waves = j.at("released_waves").get<std::vector<int>>();
      r.b_curr = j.at("b_curr").get<int>();
      const auto& t = j.at("t_min_res");
      r.t_min_res = t.is_null() ? kInfiniteTime : t.get<Micros>();
      const auto& raw = j.at("raw_min_remaining");
      r.raw_min_remaining = raw.is_null() ? kInfiniteTime : raw.get<Micros>();
      r.degenerate = j.at("degenerate").get<bool>();
      r.late_rt = j.at("late_rt").get<int>();
      r.empty_blocks = j.at("empty_blocks").get<int>();
      r.m_new_total = j.at("m_new").get<int>();
      r.rt_k = j.at("rt_k").get<std::vector<int>>();
      r.rt_remaining = j.at("rt_remaining").get<std::vector<Micros>>();
      log.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed event log: ") + e.what(), line_no);
    }
  }
  if (line_no == 0) {
    throw ParseError("event log is empty", 1);
  }
  return log;
}

Simulator::Simulator(SimConfig config, const Trace& trace)
    : config_(std::move(config)),
      kv_(config_.pool.num_blocks, config_.pool.slots_per_block, config_.pool.bidirectional),
      scheduler_(make_scheduler(config_.scheduler)) {
  config_.validate();
  log_.scheduler = std::string(to_string(config_.scheduler.kind));
  log_.horizon = config_.horizon;
  log_.token_group_size = config_.slo.token_group_size;
  log_.release_times.assign(trace.entries.size(), -1);

  requests_.reserve(trace.entries.size());
  for (std::size_t i = 0; i < trace.entries.size(); ++i) {
    const auto& e = trace.entries[i];
    const auto id = static_cast<RequestId>(i);
    const Micros arrival = std::max<Micros>(0, e.arrival_time);
    Request r = make_request(id, e.cls, arrival, e.prompt_len, e.output_len, config_.slo);
    const int wave = e.cls == RequestClass::kBestEffort ? e.wave() : 0;
    r.wave = e.cls == RequestClass::kBestEffort ? wave : -1;
    requests_.push_back(r);
    if (wave == 0) {
      timed_.push_back(id);
      if (e.cls == RequestClass::kBestEffort) {
        ++be_unfinished_;
      }
    } else {
      if (static_cast<int>(waves_.size()) <= wave) {
        waves_.resize(static_cast<std::size_t>(wave) + 1);
      }
      waves_[wave].push_back(id);
    }
  }
  std::stable_sort(timed_.begin(), timed_.end(), [&](RequestId a, RequestId b) {
    return requests_[a].arrival_time < requests_[b].arrival_time;
  });
}

std::optional<Micros> Simulator::next_arrival() const {
  if (next_timed_ < timed_.size()) {
    return requests_[timed_[next_timed_]].arrival_time;
  }
  return std::nullopt;
}

void Simulator::release_arrivals() {
  while (next_timed_ < timed_.size() && requests_[timed_[next_timed_]].arrival_time <= clock_) {
    const RequestId id = timed_[next_timed_++];
    queues_.enqueue_waiting(requests_[id]);
    log_.release_times[id] = requests_[id].arrival_time;
  }
}

void Simulator::release_waves(std::vector<int>& released) {
  while (be_unfinished_ == 0 && current_wave_ + 1 < static_cast<int>(waves_.size())) {
    ++current_wave_;
    for (RequestId id : waves_[current_wave_]) {
      Request& r = requests_[id];
      r.arrival_time = clock_;
      r.group_start = clock_;
      queues_.enqueue_waiting(r);
      log_.release_times[id] = clock_;
      ++be_unfinished_;
    }
    if (!waves_[current_wave_].empty()) {
      released.push_back(current_wave_);
    }
  }
}

void Simulator::drop_kv(RequestId id, std::vector<KvAction>& actions) {
  auto freed = kv_.release(id);
  actions.insert(actions.end(), freed.begin(), freed.end());
  Request& r = requests_[id];
  r.needs_prefill = true;
  r.phase = Phase::kDropped;
  scheduler_->on_released(r);
}

bool Simulator::step() {
  if (done_) {
    return false;
  }
  last_actions_.clear();
  std::vector<int> released;
  release_arrivals();
  release_waves(released);

  if (queues_.empty()) {
    const auto next = next_arrival();
    if (!next || *next >= config_.horizon) {
      done_ = true;
      log_.end_clock = clock_;
      return false;
    }
    clock_ = std::max(clock_, *next);
    release_arrivals();
  }
  if (clock_ >= config_.horizon) {
    done_ = true;
    log_.end_clock = clock_;
    return false;
  }

  for (const auto* q : {&queues_.rt_waiting, &queues_.rt_pending}) {
    for (RequestId id : *q) {
      sync_elapsed(requests_[id], clock_);
    }
  }

  SchedContext ctx{requests_, queues_, kv_, config_.models, config_.slo};
  const int b_curr = scheduler_->state().b_curr;
  ScheduleDecision d = scheduler_->schedule(ctx);
  for (RequestId v : d.dropped) {
    requests_[v].phase = Phase::kDropped;
    scheduler_->on_released(requests_[v]);
  }
  last_actions_ = d.drop_actions;

  if (d.empty()) {
    // Nothing fits: free the largest BE cache so that work can resume.
    std::optional<RequestId> victim;
    int most = 0;
    for (const auto* q : {&queues_.be_pending, &queues_.be_waiting}) {
      for (RequestId id : *q) {
        const int f = kv_.footprint(id);
        if (f > most || (f == most && f > 0 && victim && id < *victim)) {
          most = f;
          victim = id;
        }
      }
    }
    carried_drops_.insert(carried_drops_.end(), d.dropped.begin(), d.dropped.end());
    if (victim) {
      drop_kv(*victim, last_actions_);
      carried_drops_.push_back(*victim);
      return true;
    }
    const auto next = next_arrival();
    if (next && *next > clock_ && *next < config_.horizon) {
      clock_ = *next;
      return true;
    }
    throw PoolExhausted(fmt::format("no queued request can be scheduled at t={}us", clock_));
  }

  auto actions = kv_.commit(d.plans);
  last_actions_.insert(last_actions_.end(), actions.begin(), actions.end());

  IterationRecord rec;
  rec.index = static_cast<std::int64_t>(log_.records.size());
  rec.start = clock_;
  rec.estimated = d.estimated_time;
  const Micros duration = d.estimated_time + config_.overhead_us;
  clock_ += duration;
  rec.end = clock_;
  rec.rt_ids = d.rt_ready;
  rec.be_ids = d.be_ready;
  rec.swap_blocks = d.swap_blocks_total;
  rec.b_curr = b_curr;
  rec.t_min_res = d.t_min_res;
  rec.raw_min_remaining = d.raw_min_remaining;
  rec.degenerate = d.degenerate;
  rec.late_rt = d.late_rt;
  rec.empty_blocks = d.empty_blocks;
  rec.m_new_total = d.m_new_total;
  rec.rt_k = d.rt_group_remaining;
  rec.rt_remaining = d.rt_remaining;
  rec.released_waves = std::move(released);
  rec.dropped = std::move(carried_drops_);
  carried_drops_.clear();
  rec.dropped.insert(rec.dropped.end(), d.dropped.begin(), d.dropped.end());
  for (const auto& a : actions) {
    rec.checkpoints += a.kind == KvActionKind::kCheckpoint ? 1 : 0;
    rec.restores += a.kind == KvActionKind::kRestore ? 1 : 0;
    rec.relocations += a.kind == KvActionKind::kRelocate ? 1 : 0;
  }

  for (const auto* ids : {&d.rt_ready, &d.be_ready}) {
    for (RequestId id : *ids) {
      Request& r = requests_[id];
      queues_.promote(r);
      r.needs_prefill = false;
      r.phase = Phase::kRunning;
      const bool finished = advance_token_group(r, clock_, config_.slo.token_group_size);
      if (finished) {
        queues_.remove(id);
        auto freed = kv_.release(id);
        last_actions_.insert(last_actions_.end(), freed.begin(), freed.end());
        scheduler_->on_released(r);
        rec.finished.push_back(id);
        if (!r.is_rt()) {
          --be_unfinished_;
        }
      } else {
        r.phase = Phase::kPending;
      }
    }
  }
  for (RequestId id : d.recompute) {
    drop_kv(id, last_actions_);
    rec.dropped.push_back(id);
  }

  scheduler_->after_iteration(d, duration);
  log_.records.push_back(std::move(rec));
  log_.end_clock = clock_;
  if (config_.check_invariants) {
    check_invariants();
  }
  return true;
}

void Simulator::run() {
  while (step()) {
  }
}

void Simulator::check_invariants() const {
  kv_.check_invariants();
  std::vector<int> seen(requests_.size(), 0);
  for (const auto* q : {&queues_.rt_waiting, &queues_.rt_pending, &queues_.be_waiting,
                        &queues_.be_pending}) {
    for (RequestId id : *q) {
      ++seen[id];
    }
  }
  for (std::size_t i = 0; i < requests_.size(); ++i) {
    const Request& r = requests_[i];
    const bool released = log_.release_times[i] >= 0;
    const int expected = (released && r.phase != Phase::kFinished) ? 1 : 0;
    if (seen[i] != expected) {
      throw ConsistencyError(fmt::format("request {} appears in {} queues", i, seen[i]));
    }
    if (r.context_len != r.prompt_len + r.generated) {
      throw ConsistencyError(fmt::format("request {} context length drifted", i));
    }
    if (r.phase != Phase::kFinished && !r.needs_prefill &&
        kv_.stored_tokens(r.id) != r.context_len - 1) {
      throw ConsistencyError(fmt::format("request {} stores {} tokens, expected {}", i,
                                         kv_.stored_tokens(r.id), r.context_len - 1));
    }
    if (r.needs_prefill && kv_.holds(r.id)) {
      throw ConsistencyError(fmt::format("request {} awaits prefill but holds blocks", i));
    }
  }
  for (std::size_t i = 1; i < queues_.rt_waiting.size(); ++i) {
    if (requests_[queues_.rt_waiting[i - 1]].arrival_time >
        requests_[queues_.rt_waiting[i]].arrival_time) {
      throw ConsistencyError("RT waiting queue out of arrival order");
    }
  }
}

}  // namespace rtbe
