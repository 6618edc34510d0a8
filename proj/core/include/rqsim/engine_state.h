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
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "rqsim/batch.h"
#include "rqsim/prefix_cache.h"
#include "rqsim/sim_time.h"
#include "rqsim/workload.h"

namespace rqsim {

enum class RequestPhase { kPending, kWaiting, kRunning, kCompleted };

struct RequestState {
  std::uint32_t rel = 0;  // index into EngineState::relqueries
  RequestId req_id = 0;
  std::vector<Token> tokens;
  std::uint32_t output_limit = 0;
  std::uint32_t actual_output_len = 0;
  std::uint32_t generated = 0;
  RequestPhase phase = RequestPhase::kPending;

  std::uint32_t tok() const { return static_cast<std::uint32_t>(tokens.size()); }
  std::span<const Token> token_span() const { return tokens; }
};

// Per-relQuery timestamps behind the waiting/core/tail decomposition.
struct TimestampLedger {
  SimTime arrival{};
  std::optional<SimTime> first_prefill_start;
  std::optional<SimTime> last_prefill_end;
  std::optional<SimTime> last_decode_end;

  bool complete() const {
    return first_prefill_start && last_prefill_end && last_decode_end;
  }
};

struct PriorityRecord {
  RelQueryId rel_id = 0;
  double value = 0.0;  // estimated remaining duration (s), before any override
  std::uint64_t iteration_computed = 0;
  bool reused = false;
};

struct RelQueryState {
  RelQueryId rel_id = 0;
  std::uint32_t size = 0;
  std::uint32_t output_limit = 0;
  SimTime arrival{};
  std::vector<std::uint32_t> requests;  // request indices, req_id order
  std::deque<std::uint32_t> waiting;    // still-waiting requests, req_id order
  std::uint32_t num_prefilled = 0;      // requests that entered a prefill batch
  std::uint32_t num_completed = 0;
  bool admitted = false;

  // Effective scheduling priority; lower runs first.
  double priority = 0.0;
  bool overridden = false;
  std::optional<PriorityRecord> record;
  std::optional<CacheMissRatio> miss_ratio;
  TimestampLedger ledger;

  bool finished() const { return num_completed == size; }
  std::uint32_t num_running() const { return num_prefilled - num_completed; }
};

struct EngineState {
  EngineState(std::uint32_t block_size, std::size_t cache_capacity_blocks)
      : cache(block_size, cache_capacity_blocks) {}

  SimTime clock{};
  std::uint64_t iteration = 0;
  SchedulerConstraints constraints;
  std::vector<RequestState> requests;
  std::vector<RelQueryState> relqueries;
  // Q⁻: relQueries holding at least one waiting request, in scheduling order.
  // Requests inside a relQuery follow req_id order.
  std::vector<std::uint32_t> waiting_order;
  // Q⁺: running request indices in prefill order.
  std::vector<std::uint32_t> running;
  std::uint64_t kv_resident_tokens = 0;  // Σ running (tok + generated)
  std::uint64_t kv_reserved_tokens = 0;  // Σ running (tok + output_limit)
  PrefixCache cache;

  std::size_t waiting_request_count() const;
  // Waiting requests in queue order.
  std::vector<std::uint32_t> waiting_requests() const;
};

// Orders Q⁻ by (priority, arrival, rel_id); request order inside a relQuery
// is req_id, which completes the (priority, arrival, rel_id, req_id) key.
void sort_waiting_queue(EngineState& state);

}  // namespace rqsim
