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

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "rqsim/batch.h"
#include "rqsim/batch_arranger.h"
#include "rqsim/cost_model.h"
#include "rqsim/engine_state.h"
#include "rqsim/priority.h"
#include "rqsim/workload.h"

namespace rqsim {

enum class Policy { kFcfs, kStaticPriority, kRelServe, kRelServePP, kRelServeDP };

// Canonical names: fcfs, sp, relserve, relserve-pp, relserve-dp.
std::string_view policy_name(Policy policy);
// Accepts the canonical names plus "static". Throws ConfigError otherwise.
Policy parse_policy(std::string_view name);
std::vector<Policy> all_policies();
// True for the policies that use the DPU and the single-relQuery prefill rule.
bool is_adaptive(Policy policy);

struct EngineConfig {
  Policy policy = Policy::kRelServe;
  SchedulerConstraints constraints;
  LinearCostModel world;   // ground truth used to advance the clock
  LinearCostModel belief;  // what the scheduler predicts with
  DpuConfig dpu;
  // Static priority terms; default L1(tok) = α_p·tok, L2(OL) = α_d·OL of the
  // belief model.
  std::optional<LinearFn> static_l1;
  std::optional<LinearFn> static_l2;
  std::uint32_t block_size = 16;
  std::size_t cache_capacity_blocks = 4096;
  double noise_sigma = 0.0;  // multiplicative noise on world durations
  std::uint64_t seed = 0;
  // 0 picks a bound from the trace size.
  std::uint64_t max_iterations = 0;
  bool record_decisions = true;

  void validate() const;
};

struct DecisionRecord {
  std::uint64_t iteration = 0;
  SimTime clock{};
  DecisionCase tag = DecisionCase::kIdle;
  Action action = Action::kIdle;
  std::optional<double> m_plus;
  std::optional<double> m_minus;
  std::optional<DeltaProjection> delta;
  std::uint32_t batch_requests = 0;
  std::uint64_t batch_uncached_tokens = 0;
};

struct RelQueryResult {
  RelQueryId rel_id = 0;
  std::uint32_t size = 0;
  TimestampLedger ledger;
};

struct RunStats {
  std::uint64_t iterations = 0;
  std::uint64_t prefill_iterations = 0;
  std::uint64_t decode_iterations = 0;
  std::uint64_t idle_jumps = 0;
  std::uint64_t input_tokens = 0;
  std::uint64_t cache_hit_tokens = 0;
  std::uint64_t priorities_recomputed = 0;
  std::uint64_t priorities_reused = 0;
  std::uint64_t starvation_overrides = 0;
  SimTime first_arrival{};
  SimTime end{};
  double dpu_wall_s = 0.0;
  double aba_wall_s = 0.0;
  double run_wall_s = 0.0;

  double cache_hit_ratio() const;
  SimDuration makespan() const { return end - first_arrival; }
};

struct RunResult {
  Policy policy = Policy::kFcfs;
  double rate = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t trace_fingerprint = 0;
  std::vector<RelQueryResult> relqueries;  // rel_id order
  std::vector<DecisionRecord> decisions;
  RunStats stats;
};

// Throws InfeasibleRequestError when a request could never be prefilled under
// the constraints (tok > mnbt or tok + output_limit > cap).
void check_feasible(const ArrivalTrace& trace, const SchedulerConstraints& constraints);

// Single-threaded serving loop over one trace.
class Engine {
 public:
  Engine(const ArrivalTrace& trace, EngineConfig config);

  const EngineState& state() const { return state_; }
  const EngineConfig& config() const { return config_; }
  bool done() const { return completed_relqueries_ == state_.relqueries.size(); }

  // Moves every pending relQuery with arrival <= clock into Q⁻.
  std::size_t admit_arrivals();
  // Runs one scheduling iteration (or an idle jump to the next arrival).
  // Returns false once every relQuery has completed.
  bool step();
  // Executes a batch and advances the clock; returns the elapsed time.
  SimDuration execute_prefill(const PrefillBatch& batch);
  SimDuration execute_decode(const DecodeBatch& batch);

  const std::vector<DecisionRecord>& decisions() const { return decisions_; }
  const RunStats& stats() const { return stats_; }
  // Runs to completion and packages the result.
  RunResult finish();

 private:
  Decision schedule(CandidatePair& pair, std::optional<DeltaProjection>& delta);
  SimDuration world_duration(double seconds);
  double static_priority(std::uint32_t rel) const;

  EngineConfig config_;
  EngineState state_;
  double rate_ = 0.0;
  std::uint64_t trace_seed_ = 0;
  std::size_t next_arrival_ = 0;  // index into state_.relqueries (arrival order)
  std::size_t completed_relqueries_ = 0;
  std::uint64_t max_iterations_ = 0;
  std::mt19937_64 dpu_rng_;
  std::mt19937_64 noise_rng_;
  std::vector<DecisionRecord> decisions_;
  RunStats stats_;
};

// Builds an engine, runs it to completion and fills in the trace fingerprint.
RunResult run(const ArrivalTrace& trace, const EngineConfig& config);

}  // namespace rqsim
