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

#include "rqsim/priority.h"

#include <algorithm>
#include <cmath>

#include "rqsim/errors.h"

namespace rqsim {

double static_req_prio(std::uint32_t tok, std::uint32_t output_limit,
                       const LinearFn& l1, const LinearFn& l2) {
  return l1(static_cast<double>(tok)) + l2(static_cast<double>(output_limit));
}

double static_relquery_prio(const RelQuery& relquery, const LinearFn& l1,
                            const LinearFn& l2) {
  double sum = 0.0;
  for (const auto& req : relquery.requests) {
    sum += static_req_prio(req.tok(), req.output_limit, l1, l2);
  }
  return sum;
}

std::uint64_t Decomposition::decode_iterations() const {
  std::uint64_t n = 0;
  for (const auto& d : decodes) n += d.repeat;
  return n;
}

namespace {

// Decode batches of one segment: depth runs where only requests with enough
// remaining budget stay in the batch.
void emit_segment_decodes(std::span<const PemRequest> requests,
                          const std::vector<std::uint32_t>& members,
                          std::vector<DecodeBatch>& out) {
  std::vector<std::uint32_t> depths;
  for (auto m : members) {
    if (requests[m].remaining_decodes > 0) depths.push_back(requests[m].remaining_decodes);
  }
  std::sort(depths.begin(), depths.end());
  depths.erase(std::unique(depths.begin(), depths.end()), depths.end());
  std::uint32_t prev = 0;
  for (auto depth : depths) {
    DecodeBatch batch;
    batch.repeat = depth - prev;
    for (auto m : members) {
      if (requests[m].remaining_decodes >= depth) batch.requests.push_back(requests[m].id);
    }
    out.push_back(std::move(batch));
    prev = depth;
  }
}

}  // namespace

Decomposition batch_decompose(std::span<const PemRequest> requests,
                              const SchedulerConstraints& constraints) {
  Decomposition out;
  PrefillBatch p;
  std::vector<std::uint32_t> d;  // positions into `requests`
  std::uint64_t accum = 0;

  auto flush_prefill = [&] {
    if (!p.empty()) out.prefills.push_back(std::move(p));
    p = PrefillBatch{};
  };
  // The segment decodes to completion, which frees all of its KV tokens.
  auto flush_segment = [&] {
    flush_prefill();
    emit_segment_decodes(requests, d, out.decodes);
    d.clear();
    accum = 0;
  };

  for (std::uint32_t i = 0; i < requests.size(); ++i) {
    const auto& r = requests[i];
    if (r.utok > constraints.cap || r.utok > constraints.max_num_batched_tokens) {
      throw InfeasibleRequestError("request " + std::to_string(r.id) + " needs " +
                                   std::to_string(r.utok) +
                                   " uncached tokens, beyond cap/mnbt");
    }
    if (!d.empty() && (r.utok + accum > constraints.cap ||
                       d.size() + 1 > constraints.max_num_seqs)) {
      flush_segment();
    }
    if (!p.empty() && r.utok + p.uncached_tokens > constraints.max_num_batched_tokens) {
      flush_prefill();
    }
    if (!r.prefilled) {
      p.requests.push_back(r.id);
      p.uncached_tokens += r.utok;
    }
    d.push_back(i);
    accum += r.utok;
  }
  if (!p.empty() || !d.empty()) flush_segment();
  return out;
}

double decomposition_duration(const Decomposition& d, const LinearCostModel& model) {
  double total = 0.0;
  for (const auto& p : d.prefills) {
    total += predict_prefill(model, UncachedTokens{p.uncached_tokens});
  }
  for (const auto& batch : d.decodes) {
    total += batch.repeat * predict_decode(model, batch.requests.size());
  }
  return total;
}

double pem(std::span<const PemRequest> requests,
           const SchedulerConstraints& constraints, const LinearCostModel& model) {
  return decomposition_duration(batch_decompose(requests, constraints), model);
}

std::vector<PemRequest> pem_inputs(const EngineState& state,
                                   const RelQueryState& relquery,
                                   double miss_ratio) {
  std::vector<PemRequest> out;
  out.reserve(relquery.requests.size());
  for (auto idx : relquery.requests) {
    const auto& req = state.requests[idx];
    if (req.phase == RequestPhase::kWaiting) {
      out.push_back({idx, utok_approx(req.tok(), miss_ratio),
                     req.output_limit - req.generated, false});
    } else if (req.phase == RequestPhase::kRunning) {
      out.push_back({idx, 0, req.output_limit - req.generated, true});
    }
  }
  return out;
}

bool can_reuse_priority(const RelQueryState& relquery) {
  return relquery.record.has_value() && relquery.num_prefilled == 0;
}

double recompute_priority(EngineState& state, std::uint32_t rel,
                          const DpuConfig& config, const LinearCostModel& model,
                          std::mt19937_64& rng) {
  auto& rq = state.relqueries[rel];
  std::vector<std::span<const Token>> candidates;
  candidates.reserve(rq.waiting.size());
  for (auto idx : rq.waiting) candidates.push_back(state.requests[idx].token_span());
  if (!candidates.empty()) {
    rq.miss_ratio = sample_cache_miss_ratio(state.cache, rq.rel_id, candidates,
                                            config.sample_size, rng, state.iteration);
  }
  return priority_with_frozen_ratio(state, rel, model);
}

double priority_with_frozen_ratio(const EngineState& state, std::uint32_t rel,
                                  const LinearCostModel& model) {
  const auto& rq = state.relqueries[rel];
  const double ratio = rq.miss_ratio ? rq.miss_ratio->ratio : 1.0;
  const auto inputs = pem_inputs(state, rq, ratio);
  return pem(inputs, state.constraints, model);
}

PriorityUpdateStats update_priorities(EngineState& state, const DpuConfig& config,
                                      const LinearCostModel& model,
                                      std::mt19937_64& rng) {
  PriorityUpdateStats stats;
  for (std::uint32_t i = 0; i < state.relqueries.size(); ++i) {
    auto& rq = state.relqueries[i];
    if (!rq.admitted || rq.finished()) continue;
    if (state.iteration > 1 && can_reuse_priority(rq)) {
      rq.record->reused = true;
      ++stats.reused;
    } else {
      const double value = recompute_priority(state, i, config, model, rng);
      rq.record = PriorityRecord{rq.rel_id, value, state.iteration, false};
      ++stats.recomputed;
    }
    rq.priority = rq.overridden ? 0.0 : rq.record->value;
  }
  sort_waiting_queue(state);
  return stats;
}

SimDuration waiting_time(const RelQueryState& relquery, SimTime clock) {
  const SimTime until = relquery.ledger.first_prefill_start.value_or(clock);
  return until - relquery.arrival;
}

std::vector<RelQueryId> apply_starvation_override(EngineState& state, double tau) {
  std::vector<RelQueryId> overridden;
  if (!(tau < std::numeric_limits<double>::infinity())) return overridden;
  for (auto rel : state.waiting_order) {
    auto& rq = state.relqueries[rel];
    if (rq.overridden) continue;
    const double unit_wait = to_seconds(state.clock - rq.arrival) / rq.size;
    if (unit_wait > tau) {
      rq.priority = 0.0;
      rq.overridden = true;
      overridden.push_back(rq.rel_id);
    }
  }
  if (!overridden.empty()) sort_waiting_queue(state);
  return overridden;
}

}  // namespace rqsim
