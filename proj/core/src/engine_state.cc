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

#include "rqsim/engine_state.h"

#include <algorithm>
#include <tuple>

#include "rqsim/errors.h"

namespace rqsim {

void SchedulerConstraints::validate() const {
  if (cap == 0) throw ConfigError("cap must be positive");
  if (max_num_seqs == 0) throw ConfigError("max_num_seqs must be positive");
  if (max_num_batched_tokens == 0) {
    throw ConfigError("max_num_batched_tokens must be positive");
  }
  if (max_num_batched_tokens > cap) {
    throw ConfigError("max_num_batched_tokens must not exceed cap");
  }
}

std::size_t EngineState::waiting_request_count() const {
  std::size_t n = 0;
  for (auto rel : waiting_order) n += relqueries[rel].waiting.size();
  return n;
}

std::vector<std::uint32_t> EngineState::waiting_requests() const {
  std::vector<std::uint32_t> out;
  out.reserve(waiting_request_count());
  for (auto rel : waiting_order) {
    const auto& w = relqueries[rel].waiting;
    out.insert(out.end(), w.begin(), w.end());
  }
  return out;
}

void sort_waiting_queue(EngineState& state) {
  const auto& rqs = state.relqueries;
  std::sort(state.waiting_order.begin(), state.waiting_order.end(),
            [&](std::uint32_t a, std::uint32_t b) {
              return std::tie(rqs[a].priority, rqs[a].arrival, rqs[a].rel_id) <
                     std::tie(rqs[b].priority, rqs[b].arrival, rqs[b].rel_id);
            });
}

}  // namespace rqsim
