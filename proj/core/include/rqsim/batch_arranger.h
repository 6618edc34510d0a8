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
#include <string_view>
#include <vector>

#include "rqsim/batch.h"
#include "rqsim/cost_model.h"
#include "rqsim/engine_state.h"

namespace rqsim {

enum class Action { kIdle, kPrefill, kDecode };

enum class DecisionCase {
  kIdle,          // both candidates empty
  kForced,        // exactly one candidate non-empty
  kStatic,        // baseline prefill-first rule
  kPreempt,       // m⁺ > m⁻
  kInternal,      // both minima come from the same relQuery
  kTransitional,  // m⁺ < m⁻
};

std::string_view to_string(Action action);
std::string_view to_string(DecisionCase tag);

// How the transitional case is resolved.
enum class TransitionalRule { kAdaptive, kPrefillFirst, kDecodeFirst };

struct CandidatePair {
  DecodeBatch decode;
  PrefillBatch prefill;
  bool prefill_blocked = false;  // head of Q⁻ does not fit cap / max_num_seqs
  // Minimum priorities and the relQuery owning each minimum.
  std::optional<double> m_plus;
  std::optional<double> m_minus;
  std::optional<RelQueryId> m_plus_rel;
  std::optional<RelQueryId> m_minus_rel;
};

struct DeltaProjection {
  double delta_plus = 0.0;   // added latency of running relQueries
  double delta_minus = 0.0;  // <= 0, latency removed from waiting relQueries
  double delta_total = 0.0;  // delta_plus + delta_minus
};

// Running queue, oldest arrivals first, truncated to max_num_seqs.
DecodeBatch build_decode_candidate(const EngineState& state);

struct PrefillCandidate {
  PrefillBatch batch;
  bool blocked = false;
};

// Takes requests from the front of Q⁻ while the uncached-token budget, the KV
// reservation (tok + output_limit per request) and max_num_seqs hold; stops at
// the first violation. With `single_relquery` it also stops at the first
// request of a different relQuery.
PrefillCandidate build_prefill_candidate(const EngineState& state, bool single_relquery);

// Builds both candidates and fills in m⁺/m⁻.
CandidatePair build_candidates(const EngineState& state, bool single_relquery);

// Classifies the pair without looking at latency projections.
DecisionCase classify(const CandidatePair& pair);

struct DeltaInputs {
  double prefill_duration = 0.0;              // L_prefill(p)
  std::uint64_t prefill_requests = 0;         // req(p)
  std::uint32_t prefill_output_limit = 0;     // OL(p)
  std::vector<std::uint32_t> running_output_limits;  // OL(R) for R in R⁺
  std::uint64_t waiting_relqueries = 0;       // |R⁻|
};

DeltaProjection project_delta(const DeltaInputs& in, const LinearCostModel& model);
// Gathers the inputs from the engine state and candidates.
DeltaInputs delta_inputs(const EngineState& state, const CandidatePair& pair,
                         const LinearCostModel& model);

struct Decision {
  Action action = Action::kIdle;
  DecisionCase tag = DecisionCase::kIdle;
};

// `projection` is required for the transitional case under kAdaptive. A tie
// (Δ = 0) executes the decode candidate.
Decision decide_next(const CandidatePair& pair,
                     const std::optional<DeltaProjection>& projection,
                     TransitionalRule rule = TransitionalRule::kAdaptive);

}  // namespace rqsim
