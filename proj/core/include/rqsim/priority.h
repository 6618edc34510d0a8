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
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "rqsim/batch.h"
#include "rqsim/cost_model.h"
#include "rqsim/engine_state.h"

namespace rqsim {

// ---------------------------------------------------------------------------
// Static priority baseline

struct LinearFn {
  double slope = 0.0;
  double intercept = 0.0;
  double operator()(double x) const { return slope * x + intercept; }
};

// L1(tok) + L2(OL).
double static_req_prio(std::uint32_t tok, std::uint32_t output_limit,
                       const LinearFn& l1, const LinearFn& l2);
// Sum of static_req_prio over the relQuery's requests; 0 when empty.
double static_relquery_prio(const RelQuery& relquery, const LinearFn& l1,
                            const LinearFn& l2);

// ---------------------------------------------------------------------------
// Batch decomposition and the priority estimation model

struct PemRequest {
  std::uint32_t id = 0;
  std::uint32_t utok = 0;               // 0 for already-prefilled requests
  std::uint32_t remaining_decodes = 0;  // output_limit - generated
  bool prefilled = false;
};

struct Decomposition {
  std::vector<PrefillBatch> prefills;
  std::vector<DecodeBatch> decodes;  // run-length encoded, see DecodeBatch

  std::uint64_t decode_iterations() const;
};

// Splits a relQuery remainder into prefill and decode batches under the
// constraints. A segment ends when the next request would overflow cap or
// max_num_seqs; its decode batches then run to completion, one batch per
// depth with only the requests still live at that depth. Throws
// InfeasibleRequestError if one request alone exceeds cap or mnbt.
Decomposition batch_decompose(std::span<const PemRequest> requests,
                              const SchedulerConstraints& constraints);

double decomposition_duration(const Decomposition& d, const LinearCostModel& model);

// Σ L_prefill(p) + Σ L_decode(d) over batch_decompose(requests).
double pem(std::span<const PemRequest> requests,
           const SchedulerConstraints& constraints, const LinearCostModel& model);

// PEM inputs for the live requests of one relQuery; waiting requests get
// utok*(r) from the given miss ratio.
std::vector<PemRequest> pem_inputs(const EngineState& state,
                                   const RelQueryState& relquery,
                                   double miss_ratio);

// ---------------------------------------------------------------------------
// Dynamic priority updater

struct DpuConfig {
  std::size_t sample_size = 8;
  double tau = std::numeric_limits<double>::infinity();  // s per request
};

// True when the previous value may be reused: a record exists and no request
// of the relQuery has entered a prefill batch (so none completed either).
bool can_reuse_priority(const RelQueryState& relquery);

// Samples a fresh miss ratio for the relQuery's waiting requests and runs PEM.
double recompute_priority(EngineState& state, std::uint32_t rel,
                          const DpuConfig& config, const LinearCostModel& model,
                          std::mt19937_64& rng);

// PEM with the relQuery's current (frozen) miss ratio; no sampling.
double priority_with_frozen_ratio(const EngineState& state, std::uint32_t rel,
                                  const LinearCostModel& model);

struct PriorityUpdateStats {
  std::size_t reused = 0;
  std::size_t recomputed = 0;
};

// Refreshes priorities of every admitted, unfinished relQuery for the current
// iteration, then re-sorts Q⁻. Overridden relQueries keep priority 0; call
// apply_starvation_override afterwards.
PriorityUpdateStats update_priorities(EngineState& state, const DpuConfig& config,
                                      const LinearCostModel& model,
                                      std::mt19937_64& rng);

// Waiting time of a relQuery: from arrival until its first prefill if it
// started, otherwise until `clock`.
SimDuration waiting_time(const RelQueryState& relquery, SimTime clock);

// Sets priority 0 for every relQuery in Q⁻ whose time since arrival divided by
// its original size exceeds tau, then re-sorts Q⁻. The override lasts until the
// relQuery completes. Returns the newly overridden ids.
std::vector<RelQueryId> apply_starvation_override(EngineState& state, double tau);

}  // namespace rqsim
