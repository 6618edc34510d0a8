/* Copyright 2026 The rqsim Authors. All Rights Reserved.

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

#include "rqsim/engine.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "rqsim/errors.h"
#include "rqsim/trace_io.h"

namespace rqsim {

std::string_view policy_name(Policy policy) {
  switch (policy) {
    case Policy::kFcfs:
      return "fcfs";
    case Policy::kStaticPriority:
      return "sp";
    case Policy::kRelServe:
      return "relserve";
    case Policy::kRelServePP:
      return "relserve-pp";
    case Policy::kRelServeDP:
      return "relserve-dp";
  }
  return "unknown";
}

Policy parse_policy(std::string_view name) {
  for (Policy p : all_policies()) {
    if (name == policy_name(p)) return p;
  }
  if (name == "static") return Policy::kStaticPriority;
  throw ConfigError("unknown policy '" + std::string(name) + "'");
}

std::vector<Policy> all_policies() {
  return {Policy::kFcfs, Policy::kStaticPriority, Policy::kRelServe, Policy::kRelServePP,
          Policy::kRelServeDP};
}

bool is_adaptive(Policy policy) {
  return policy == Policy::kRelServe || policy == Policy::kRelServePP ||
         policy == Policy::kRelServeDP;
}

void EngineConfig::validate() const {
  constraints.validate();
  world.validate();
  belief.validate();
  if (block_size == 0) throw ConfigError("block_size must be positive");
  if (dpu.sample_size == 0) throw ConfigError("sample_size must be positive");
  if (!(dpu.tau > 0.0)) throw ConfigError("tau must be positive");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ConfigError("noise_sigma must be a finite non-negative number");
  }
}

double RunStats::cache_hit_ratio() const {
  return input_tokens == 0 ? 0.0
                           : static_cast<double>(cache_hit_tokens) /
                                 static_cast<double>(input_tokens);
}

void check_feasible(const ArrivalTrace& trace, const SchedulerConstraints& constraints) {
  for (const auto& rq : trace.entries) {
    for (const auto& req : rq.requests) {
      if (req.tok() > constraints.max_num_batched_tokens ||
          std::uint64_t{req.tok()} + req.output_limit > constraints.cap) {
        throw InfeasibleRequestError(
            "relQuery " + std::to_string(rq.rel_id) + " request " +
            std::to_string(req.req_id) + " (tok " + std::to_string(req.tok()) +
            ", output_limit " + std::to_string(req.output_limit) +
            ") cannot fit max_num_batched_tokens " +
            std::to_string(constraints.max_num_batched_tokens) + " / cap " +
            std::to_string(constraints.cap));
      }
    }
  }
}

namespace {

using WallClock = std::chrono::steady_clock;

double wall_seconds(WallClock::time_point since) {
  return std::chrono::duration<double>(WallClock::now() - since).count();
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

}  // namespace

Engine::Engine(const ArrivalTrace& trace, EngineConfig config)
    : config_(std::move(config)),
      state_(config_.block_size, config_.cache_capacity_blocks),
      rate_(trace.rate),
      trace_seed_(trace.seed),
      dpu_rng_(make_stream(config_.seed, 1)),
      noise_rng_(make_stream(config_.seed, 2)) {
  config_.validate();
  if (trace.entries.empty()) throw ConfigError("trace has no relQueries");
  check_feasible(trace, config_.constraints);
  state_.constraints = config_.constraints;

  std::uint64_t work = 0;
  state_.relqueries.reserve(trace.entries.size());
  for (const auto& entry : trace.entries) {
    RelQueryState rq;
    rq.rel_id = entry.rel_id;
    rq.size = entry.size;
    rq.output_limit = entry.output_limit;
    rq.arrival = entry.arrival;
    rq.ledger.arrival = entry.arrival;
    const auto rel = static_cast<std::uint32_t>(state_.relqueries.size());
    for (const auto& req : entry.requests) {
      RequestState rs;
      rs.rel = rel;
      rs.req_id = req.req_id;
      rs.tokens = req.tokens;
      rs.output_limit = req.output_limit;
      rs.actual_output_len = req.actual_output_len;
      rq.requests.push_back(static_cast<std::uint32_t>(state_.requests.size()));
      state_.requests.push_back(std::move(rs));
      work += req.actual_output_len + 1;
    }
    std::sort(rq.requests.begin(), rq.requests.end(), [&](std::uint32_t a, std::uint32_t b) {
      return state_.requests[a].req_id < state_.requests[b].req_id;
    });
    if (rq.size == 0) throw ConfigError("relQuery " + std::to_string(rq.rel_id) + " is empty");
    state_.relqueries.push_back(std::move(rq));
  }
  max_iterations_ = config_.max_iterations != 0 ? config_.max_iterations
                                                : 4 * work + 4 * trace.entries.size() + 1024;
  stats_.first_arrival = state_.relqueries.front().arrival;
  state_.clock = stats_.first_arrival;
  if (!config_.static_l1) config_.static_l1 = LinearFn{config_.belief.alpha_p, 0.0};
  if (!config_.static_l2) config_.static_l2 = LinearFn{config_.belief.alpha_d, 0.0};
}

double Engine::static_priority(std::uint32_t rel) const {
  double sum = 0.0;
  for (auto idx : state_.relqueries[rel].requests) {
    const auto& req = state_.requests[idx];
    sum += static_req_prio(req.tok(), req.output_limit, *config_.static_l1, *config_.static_l2);
  }
  return sum;
}

std::size_t Engine::admit_arrivals() {
  std::size_t admitted = 0;
  while (next_arrival_ < state_.relqueries.size() &&
         state_.relqueries[next_arrival_].arrival <= state_.clock) {
    const auto rel = static_cast<std::uint32_t>(next_arrival_++);
    auto& rq = state_.relqueries[rel];
    rq.admitted = true;
    for (auto idx : rq.requests) {
      state_.requests[idx].phase = RequestPhase::kWaiting;
      rq.waiting.push_back(idx);
    }
    if (config_.policy == Policy::kStaticPriority) {
      const auto t0 = WallClock::now();
      rq.priority = static_priority(rel);
      stats_.dpu_wall_s += wall_seconds(t0);
    }
    state_.waiting_order.push_back(rel);
    ++admitted;
  }
  if (admitted > 0) sort_waiting_queue(state_);
  return admitted;
}

SimDuration Engine::world_duration(double seconds) {
  if (config_.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, 1.0);
    seconds *= std::max(0.0, 1.0 + config_.noise_sigma * noise(noise_rng_));
  }
  return from_seconds(seconds);
}

Decision Engine::schedule(CandidatePair& pair, std::optional<DeltaProjection>& delta) {
  const bool adaptive = is_adaptive(config_.policy);
  pair = build_candidates(state_, adaptive);
  if (!adaptive) {
    if (pair.prefill.empty()) {
      return pair.decode.empty() ? Decision{Action::kIdle, DecisionCase::kIdle}
                                 : Decision{Action::kDecode, DecisionCase::kForced};
    }
    return {Action::kPrefill,
            pair.decode.empty() ? DecisionCase::kForced : DecisionCase::kStatic};
  }
  if (classify(pair) == DecisionCase::kTransitional) {
    delta = project_delta(delta_inputs(state_, pair, config_.belief), config_.belief);
  }
  TransitionalRule rule = TransitionalRule::kAdaptive;
  if (config_.policy == Policy::kRelServePP) rule = TransitionalRule::kPrefillFirst;
  if (config_.policy == Policy::kRelServeDP) rule = TransitionalRule::kDecodeFirst;
  return decide_next(pair, delta, rule);
}

bool Engine::step() {
  if (done()) return false;
  admit_arrivals();
  if (state_.waiting_order.empty() && state_.running.empty()) {
    // Nothing admitted is live: jump to the next arrival.
    state_.clock = std::max(state_.clock, state_.relqueries[next_arrival_].arrival);
    ++stats_.idle_jumps;
    admit_arrivals();
  }
  if (++state_.iteration > max_iterations_) {
    throw SimulationAbort("iteration limit " + std::to_string(max_iterations_) +
                          " exceeded at clock " + format_seconds(state_.clock));
  }
  ++stats_.iterations;

  if (is_adaptive(config_.policy)) {
    const auto t0 = WallClock::now();
    const auto updated = update_priorities(state_, config_.dpu, config_.belief, dpu_rng_);
    stats_.starvation_overrides += apply_starvation_override(state_, config_.dpu.tau).size();
    stats_.dpu_wall_s += wall_seconds(t0);
    stats_.priorities_recomputed += updated.recomputed;
    stats_.priorities_reused += updated.reused;
  }

  const auto t0 = WallClock::now();
  CandidatePair pair;
  std::optional<DeltaProjection> delta;
  const Decision decision = schedule(pair, delta);
  stats_.aba_wall_s += wall_seconds(t0);

  if (config_.record_decisions) {
    DecisionRecord rec;
    rec.iteration = state_.iteration;
    rec.clock = state_.clock;
    rec.tag = decision.tag;
    rec.action = decision.action;
    rec.m_plus = pair.m_plus;
    rec.m_minus = pair.m_minus;
    rec.delta = delta;
    if (decision.action == Action::kPrefill) {
      rec.batch_requests = static_cast<std::uint32_t>(pair.prefill.requests.size());
      rec.batch_uncached_tokens = pair.prefill.uncached_tokens;
    } else if (decision.action == Action::kDecode) {
      rec.batch_requests = static_cast<std::uint32_t>(pair.decode.requests.size());
    }
    decisions_.push_back(rec);
  }

  switch (decision.action) {
    case Action::kPrefill:
      execute_prefill(pair.prefill);
      break;
    case Action::kDecode:
      execute_decode(pair.decode);
      break;
    case Action::kIdle:
      throw SimulationAbort("no executable batch at clock " + format_seconds(state_.clock) +
                            " with " + std::to_string(state_.waiting_request_count()) +
                            " waiting requests");
  }
  return !done();
}

SimDuration Engine::execute_prefill(const PrefillBatch& batch) {
  const SimTime start = state_.clock;
  std::uint64_t uncached = 0;
  std::vector<std::uint32_t> touched;
  for (auto idx : batch.requests) {
    auto& req = state_.requests[idx];
    auto& rq = state_.relqueries[req.rel];
    if (req.phase != RequestPhase::kWaiting || rq.waiting.empty() ||
        rq.waiting.front() != idx) {
      throw SimulationAbort("prefill batch is out of queue order");
    }
    const std::uint32_t u = state_.cache.match_uncached(req.token_span());
    state_.cache.insert(req.token_span());
    uncached += u;
    stats_.input_tokens += req.tok();
    stats_.cache_hit_tokens += req.tok() - u;
    rq.waiting.pop_front();
    ++rq.num_prefilled;
    req.phase = RequestPhase::kRunning;
    state_.running.push_back(idx);
    state_.kv_resident_tokens += req.tok();
    state_.kv_reserved_tokens += std::uint64_t{req.tok()} + req.output_limit;
    if (!rq.ledger.first_prefill_start) rq.ledger.first_prefill_start = start;
    touched.push_back(req.rel);
  }
  const SimDuration elapsed =
      world_duration(predict_prefill(config_.world, UncachedTokens{uncached}));
  state_.clock += elapsed;
  for (auto rel : touched) state_.relqueries[rel].ledger.last_prefill_end = state_.clock;
  std::erase_if(state_.waiting_order,
                [&](std::uint32_t rel) { return state_.relqueries[rel].waiting.empty(); });
  ++stats_.prefill_iterations;
  return elapsed;
}

SimDuration Engine::execute_decode(const DecodeBatch& batch) {
  const SimDuration elapsed = world_duration(predict_decode(config_.world, batch.requests.size()));
  state_.clock += elapsed;
  bool any_completed = false;
  for (auto idx : batch.requests) {
    auto& req = state_.requests[idx];
    if (req.phase != RequestPhase::kRunning) {
      throw SimulationAbort("decode batch holds a request that is not running");
    }
    ++req.generated;
    ++state_.kv_resident_tokens;
    if (req.generated < req.actual_output_len) continue;
    auto& rq = state_.relqueries[req.rel];
    req.phase = RequestPhase::kCompleted;
    state_.kv_resident_tokens -= std::uint64_t{req.tok()} + req.generated;
    state_.kv_reserved_tokens -= std::uint64_t{req.tok()} + req.output_limit;
    ++rq.num_completed;
    any_completed = true;
    if (rq.finished()) {
      rq.ledger.last_decode_end = state_.clock;
      ++completed_relqueries_;
    }
  }
  if (any_completed) {
    std::erase_if(state_.running, [&](std::uint32_t idx) {
      return state_.requests[idx].phase == RequestPhase::kCompleted;
    });
  }
  ++stats_.decode_iterations;
  return elapsed;
}

RunResult Engine::finish() {
  const auto t0 = WallClock::now();
  while (step()) {
  }
  stats_.run_wall_s += wall_seconds(t0);
  stats_.end = state_.clock;

  RunResult result;
  result.policy = config_.policy;
  result.rate = rate_;
  result.seed = trace_seed_;
  result.relqueries.reserve(state_.relqueries.size());
  for (const auto& rq : state_.relqueries) {
    result.relqueries.push_back({rq.rel_id, rq.size, rq.ledger});
  }
  std::sort(result.relqueries.begin(), result.relqueries.end(),
            [](const RelQueryResult& a, const RelQueryResult& b) { return a.rel_id < b.rel_id; });
  result.decisions = std::move(decisions_);
  decisions_.clear();
  result.stats = stats_;
  return result;
}

RunResult run(const ArrivalTrace& trace, const EngineConfig& config) {
  Engine engine(trace, config);
  RunResult result = engine.finish();
  result.trace_fingerprint = trace_fingerprint(trace);
  return result;
}

}  // namespace rqsim
