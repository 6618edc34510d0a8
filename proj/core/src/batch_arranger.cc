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

#include "rqsim/batch_arranger.h"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <tuple>

namespace rqsim {

std::string_view to_string(Action action) {
  switch (action) {
    case Action::kIdle:
      return "idle";
    case Action::kPrefill:
      return "prefill";
    case Action::kDecode:
      return "decode";
  }
  return "unknown";
}

std::string_view to_string(DecisionCase tag) {
  switch (tag) {
    case DecisionCase::kIdle:
      return "idle";
    case DecisionCase::kForced:
      return "forced";
    case DecisionCase::kStatic:
      return "static";
    case DecisionCase::kPreempt:
      return "preempt";
    case DecisionCase::kInternal:
      return "internal";
    case DecisionCase::kTransitional:
      return "transitional";
  }
  return "unknown";
}

namespace {

auto arrival_key(const EngineState& state, std::uint32_t req_index) {
  const auto& req = state.requests[req_index];
  const auto& rq = state.relqueries[req.rel];
  return std::make_tuple(rq.arrival, rq.rel_id, req.req_id);
}

// Lowest (priority, arrival, rel_id) among the relQueries owning `requests`.
std::optional<std::uint32_t> min_priority_rel(const EngineState& state,
                                              const std::vector<std::uint32_t>& requests) {
  std::optional<std::uint32_t> best;
  for (auto idx : requests) {
    const std::uint32_t rel = state.requests[idx].rel;
    if (!best) {
      best = rel;
      continue;
    }
    const auto& a = state.relqueries[rel];
    const auto& b = state.relqueries[*best];
    if (std::tie(a.priority, a.arrival, a.rel_id) <
        std::tie(b.priority, b.arrival, b.rel_id)) {
      best = rel;
    }
  }
  return best;
}

}  // namespace

DecodeBatch build_decode_candidate(const EngineState& state) {
  DecodeBatch batch;
  batch.requests = state.running;
  if (batch.requests.size() > state.constraints.max_num_seqs) {
    std::sort(batch.requests.begin(), batch.requests.end(),
              [&](std::uint32_t a, std::uint32_t b) {
                return arrival_key(state, a) < arrival_key(state, b);
              });
    batch.requests.resize(state.constraints.max_num_seqs);
  }
  return batch;
}

PrefillCandidate build_prefill_candidate(const EngineState& state, bool single_relquery) {
  PrefillCandidate out;
  const auto& c = state.constraints;
  std::uint64_t reserved = state.kv_reserved_tokens;
  const std::size_t running = state.running.size();
  bool stopped = false;
  for (auto rel : state.waiting_order) {
    for (auto idx : state.relqueries[rel].waiting) {
      const auto& req = state.requests[idx];
      const std::uint32_t uncached = state.cache.peek_uncached(req.token_span());
      const std::uint64_t kv_need = std::uint64_t{req.tok()} + req.output_limit;
      if (out.batch.uncached_tokens + uncached > c.max_num_batched_tokens ||
          reserved + kv_need > c.cap ||
          running + out.batch.requests.size() + 1 > c.max_num_seqs) {
        stopped = true;
        break;
      }
      out.batch.requests.push_back(idx);
      out.batch.uncached_tokens += uncached;
      out.batch.input_tokens += req.tok();
      reserved += kv_need;
    }
    if (stopped || single_relquery) break;
  }
  out.blocked = out.batch.empty() && !state.waiting_order.empty();
  return out;
}

CandidatePair build_candidates(const EngineState& state, bool single_relquery) {
  CandidatePair pair;
  pair.decode = build_decode_candidate(state);
  auto prefill = build_prefill_candidate(state, single_relquery);
  pair.prefill = std::move(prefill.batch);
  pair.prefill_blocked = prefill.blocked;
  if (auto rel = min_priority_rel(state, pair.decode.requests)) {
    pair.m_plus = state.relqueries[*rel].priority;
    pair.m_plus_rel = state.relqueries[*rel].rel_id;
  }
  if (auto rel = min_priority_rel(state, pair.prefill.requests)) {
    pair.m_minus = state.relqueries[*rel].priority;
    pair.m_minus_rel = state.relqueries[*rel].rel_id;
  }
  return pair;
}

DecisionCase classify(const CandidatePair& pair) {
  if (pair.decode.empty() && pair.prefill.empty()) return DecisionCase::kIdle;
  if (pair.decode.empty() || pair.prefill.empty()) return DecisionCase::kForced;
  if (pair.m_plus_rel == pair.m_minus_rel) return DecisionCase::kInternal;
  if (*pair.m_plus > *pair.m_minus) return DecisionCase::kPreempt;
  return DecisionCase::kTransitional;
}

DeltaProjection project_delta(const DeltaInputs& in, const LinearCostModel& model) {
  DeltaProjection out;
  const double req_p = static_cast<double>(in.prefill_requests);
  std::uint32_t max_running_ol = 0;
  out.delta_plus = in.prefill_duration * static_cast<double>(in.running_output_limits.size());
  for (auto ol : in.running_output_limits) {
    out.delta_plus += model.alpha_d * req_p * std::min(ol, in.prefill_output_limit);
    max_running_ol = std::max(max_running_ol, ol);
  }
  out.delta_minus = -static_cast<double>(in.waiting_relqueries) * model.beta_d *
                    std::min(in.prefill_output_limit, max_running_ol);
  out.delta_total = out.delta_plus + out.delta_minus;
  return out;
}

DeltaInputs delta_inputs(const EngineState& state, const CandidatePair& pair,
                         const LinearCostModel& model) {
  DeltaInputs in;
  in.prefill_duration = predict_prefill(model, UncachedTokens{pair.prefill.uncached_tokens});
  in.prefill_requests = pair.prefill.requests.size();
  if (!pair.prefill.empty()) {
    const auto& req = state.requests[pair.prefill.requests.front()];
    in.prefill_output_limit = state.relqueries[req.rel].output_limit;
  }
  std::set<std::uint32_t> running_rels;
  for (auto idx : pair.decode.requests) running_rels.insert(state.requests[idx].rel);
  for (auto rel : running_rels) {
    in.running_output_limits.push_back(state.relqueries[rel].output_limit);
  }
  in.waiting_relqueries = state.waiting_order.size();
  return in;
}

Decision decide_next(const CandidatePair& pair,
                     const std::optional<DeltaProjection>& projection,
                     TransitionalRule rule) {
  const DecisionCase tag = classify(pair);
  switch (tag) {
    case DecisionCase::kIdle:
      return {Action::kIdle, tag};
    case DecisionCase::kForced:
      return {pair.prefill.empty() ? Action::kDecode : Action::kPrefill, tag};
    case DecisionCase::kPreempt:
    case DecisionCase::kInternal:
      return {Action::kPrefill, tag};
    case DecisionCase::kTransitional:
      break;
    case DecisionCase::kStatic:
      return {pair.prefill.empty() ? Action::kDecode : Action::kPrefill, tag};
  }
  switch (rule) {
    case TransitionalRule::kPrefillFirst:
      return {Action::kPrefill, tag};
    case TransitionalRule::kDecodeFirst:
      return {Action::kDecode, tag};
    case TransitionalRule::kAdaptive:
      break;
  }
  if (!projection) {
    throw std::logic_error("transitional decision needs a latency projection");
  }
  return {projection->delta_total < 0.0 ? Action::kPrefill : Action::kDecode, tag};
}

}  // namespace rqsim
