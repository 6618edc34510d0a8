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
#include <vector>

namespace rqsim {

struct SchedulerConstraints {
  std::uint64_t cap = 32768;                     // KV tokens resident on the accelerator
  std::uint32_t max_num_seqs = 256;              // requests per decode batch
  std::uint32_t max_num_batched_tokens = 4096;   // uncached tokens per prefill batch

  // Throws ConfigError unless all are positive and mnbt <= cap.
  void validate() const;
};

// Request identifiers inside batches are indices into the caller's request
// table (engine request index, or position in a PEM input list).
struct PrefillBatch {
  std::vector<std::uint32_t> requests;
  std::uint64_t uncached_tokens = 0;
  std::uint64_t input_tokens = 0;

  bool empty() const { return requests.empty(); }
};

// `repeat` consecutive decode iterations over the same request set.
struct DecodeBatch {
  std::vector<std::uint32_t> requests;
  std::uint32_t repeat = 1;

  bool empty() const { return requests.empty(); }
};

}  // namespace rqsim
