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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "rqsim/errors.h"
#include "rqsim/priority.h"
#include "scenario.h"

namespace rqsim {
namespace {

using testing::default_model;
using testing::load_waiting;
using testing::make_relquery;
using testing::make_trace;

constexpr double kInf = std::numeric_limits<double>::infinity();

const LinearFn kIdentity{1.0, 0.0};

TEST(StaticPriority, SumsLinearTerms) {
  EXPECT_DOUBLE_EQ(static_req_prio(234, 18, kIdentity, kIdentity), 252.0);
  EXPECT_NEAR(static_req_prio(100, 50, {0.001, 0.0}, {0.02, 0.0}), 1.1, 1e-12);
  RelQuery empty;
  EXPECT_EQ(static_relquery_prio(empty, kIdentity, kIdentity), 0.0);
  const RelQuery rq = make_relquery({.size = 3, .tok = 10, .output_limit = 5});
  EXPECT_DOUBLE_EQ(static_relquery_prio(rq, kIdentity, kIdentity), 45.0);
}

SchedulerConstraints constraints(std::uint64_t cap, std::uint32_t mns, std::uint32_t mnbt) {
  SchedulerConstraints c;
  c.cap = cap;
  c.max_num_seqs = mns;
  c.max_num_batched_tokens = mnbt;
  return c;
}

std::vector<PemRequest> uniform(std::uint32_t n, std::uint32_t utok, std::uint32_t decodes) {
  std::vector<PemRequest> out;
  for (std::uint32_t i = 0; i < n; ++i) out.push_back({i, utok, decodes, false});
  return out;
}

TEST(BatchDecompose, PrefillSplitsOnTokenBudget) {
  const auto d = batch_decompose(uniform(3, 100, 2), constraints(1000, 10, 200));
  ASSERT_EQ(d.prefills.size(), 2u);
  EXPECT_EQ(d.prefills[0].requests, (std::vector<std::uint32_t>{0, 1}));
  EXPECT_EQ(d.prefills[1].requests, (std::vector<std::uint32_t>{2}));
  ASSERT_EQ(d.decodes.size(), 1u);
  EXPECT_EQ(d.decodes[0].requests, (std::vector<std::uint32_t>{0, 1, 2}));
  EXPECT_EQ(d.decodes[0].repeat, 2u);
  EXPECT_EQ(d.decode_iterations(), 2u);
}

TEST(BatchDecompose, SegmentFlushesOnCap) {
  const auto d = batch_decompose(uniform(2, 100, 1), constraints(150, 10, 150));
  ASSERT_EQ(d.prefills.size(), 2u);
  EXPECT_EQ(d.prefills[0].requests, (std::vector<std::uint32_t>{0}));
  EXPECT_EQ(d.prefills[1].requests, (std::vector<std::uint32_t>{1}));
  ASSERT_EQ(d.decodes.size(), 2u);
  EXPECT_EQ(d.decodes[0].requests, (std::vector<std::uint32_t>{0}));
  EXPECT_EQ(d.decodes[1].requests, (std::vector<std::uint32_t>{1}));
}

TEST(BatchDecompose, AlreadyPrefilledOnlyDecodes) {
  std::vector<PemRequest> reqs = {{0, 0, 3, true}, {1, 0, 1, true}};
  const auto d = batch_decompose(reqs, constraints(1000, 10, 200));
  EXPECT_TRUE(d.prefills.empty());
  ASSERT_EQ(d.decodes.size(), 2u);
  EXPECT_EQ(d.decodes[0].requests, (std::vector<std::uint32_t>{0, 1}));
  EXPECT_EQ(d.decodes[0].repeat, 1u);
  EXPECT_EQ(d.decodes[1].requests, (std::vector<std::uint32_t>{0}));
  EXPECT_EQ(d.decodes[1].repeat, 2u);
}

TEST(BatchDecompose, SegmentFlushesOnMaxNumSeqs) {
  const auto d = batch_decompose(uniform(5, 10, 1), constraints(1000, 2, 1000));
  ASSERT_EQ(d.decodes.size(), 3u);
  EXPECT_EQ(d.decodes[2].requests, (std::vector<std::uint32_t>{4}));
}

TEST(BatchDecompose, OversizedRequestIsInfeasible) {
  EXPECT_THROW(batch_decompose(uniform(1, 300, 1), constraints(200, 10, 200)),
               InfeasibleRequestError);
}

TEST(Pem, HandComputedDuration) {
  // One waiting request with 200 uncached tokens and two running ones, all
  // with two decode steps left: P=[200 tokens], D=[3 requests]x2.
  std::vector<PemRequest> reqs = {{0, 200, 2, false}, {1, 0, 2, true}, {2, 0, 2, true}};
  const LinearCostModel m{0.001, 0.02, 0.0002, 0.015};
  EXPECT_NEAR(pem(reqs, SchedulerConstraints{}, m), 0.22 + 2 * 0.0156, 1e-12);
  EXPECT_EQ(pem(std::vector<PemRequest>{}, SchedulerConstraints{}, m), 0.0);
}

TEST(Pem, AppendingARequestNeverLowersTheEstimate) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::uint32_t> utok(0, 300), dec(0, 60);
  const auto c = constraints(2000, 8, 600);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<PemRequest> reqs;
    double prev = 0.0;
    for (std::uint32_t i = 0; i < 30; ++i) {
      const std::uint32_t u = utok(rng);
      reqs.push_back({i, u, dec(rng), u == 0});
      const double now = pem(reqs, c, default_model());
      ASSERT_GE(now, prev);
      prev = now;
    }
  }
}

TEST(Pem, RandomDecompositionsAreSound) {
  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<std::uint32_t> n_dist(1, 40), dec(0, 80);
  std::uniform_int_distribution<std::uint32_t> mns_dist(1, 16), mnbt_dist(50, 1000);
  std::bernoulli_distribution prefilled(0.2);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::uint32_t mnbt = mnbt_dist(rng);
    const auto c = constraints(mnbt + std::uniform_int_distribution<std::uint32_t>(0, 2000)(rng),
                               mns_dist(rng), mnbt);
    std::vector<PemRequest> reqs;
    const std::uint32_t n = n_dist(rng);
    for (std::uint32_t i = 0; i < n; ++i) {
      const bool done = prefilled(rng);
      const std::uint32_t u = done ? 0 : std::uniform_int_distribution<std::uint32_t>(0, mnbt)(rng);
      reqs.push_back({i, u, dec(rng), done});
    }
    const auto d = batch_decompose(reqs, c);

    std::map<std::uint32_t, int> prefill_count;
    for (const auto& p : d.prefills) {
      ASSERT_FALSE(p.empty());
      ASSERT_LE(p.uncached_tokens, c.max_num_batched_tokens);
      std::uint64_t sum = 0;
      for (auto id : p.requests) {
        ++prefill_count[id];
        sum += reqs[id].utok;
      }
      ASSERT_EQ(sum, p.uncached_tokens);
    }
    std::map<std::uint32_t, std::uint64_t> decode_steps;
    for (const auto& b : d.decodes) {
      ASSERT_FALSE(b.empty());
      ASSERT_GE(b.repeat, 1u);
      ASSERT_LE(b.requests.size(), c.max_num_seqs);
      std::uint64_t resident = 0;
      for (auto id : b.requests) {
        decode_steps[id] += b.repeat;
        resident += reqs[id].utok;
      }
      ASSERT_LE(resident, c.cap);
    }
    for (const auto& r : reqs) {
      ASSERT_EQ(prefill_count[r.id], r.prefilled ? 0 : 1) << "trial " << trial;
      ASSERT_EQ(decode_steps[r.id], r.remaining_decodes) << "trial " << trial;
    }
    const double duration = decomposition_duration(d, default_model());
    ASSERT_NEAR(pem(reqs, c, default_model()), duration, 1e-12);
  }
}

TEST(Pem, ShrinksWithProgress) {
  // 100 uniform requests with no cache: the estimate for the remainder tracks
  // the remaining fraction of the work.
  const SchedulerConstraints c;
  const double full = pem(uniform(100, 234, 10), c, default_model());
  for (std::uint32_t remaining : {80u, 50u, 34u, 10u}) {
    const double part = pem(uniform(remaining, 234, 10), c, default_model());
    EXPECT_NEAR(part / full, remaining / 100.0, 0.1) << remaining;
  }
}

struct DpuFixture : ::testing::Test {
  DpuFixture() : state(16, 4096) {}

  void load(const std::vector<testing::RelQuerySpec>& specs) {
    load_waiting(state, make_trace(specs));
  }

  EngineState state;
  DpuConfig config;
  std::mt19937_64 rng{3};
};

TEST_F(DpuFixture, FullyWaitingRelQueryReusesItsPriority) {
  load({{.rel_id = 0, .size = 20, .prefix_len = 50}});
  state.iteration = 1;
  auto s = update_priorities(state, config, default_model(), rng);
  EXPECT_EQ(s.recomputed, 1u);
  const double first = state.relqueries[0].priority;
  EXPECT_GT(first, 0.0);
  state.iteration = 2;
  s = update_priorities(state, config, default_model(), rng);
  EXPECT_EQ(s.reused, 1u);
  EXPECT_TRUE(state.relqueries[0].record->reused);
  EXPECT_EQ(state.relqueries[0].priority, first);
  EXPECT_EQ(state.relqueries[0].record->iteration_computed, 1u);
}

TEST_F(DpuFixture, ReusedValueEqualsRecomputation) {
  load({{.rel_id = 0, .size = 12}, {.rel_id = 1, .size = 30, .arrival_s = 1.0}});
  state.iteration = 1;
  update_priorities(state, config, default_model(), rng);
  state.iteration = 2;
  update_priorities(state, config, default_model(), rng);
  for (std::uint32_t rel = 0; rel < 2; ++rel) {
    EXPECT_EQ(state.relqueries[rel].priority,
              priority_with_frozen_ratio(state, rel, default_model()));
  }
}

TEST_F(DpuFixture, CompletedRequestsShrinkThePriority) {
  load({{.rel_id = 0, .size = 30}});
  state.iteration = 1;
  update_priorities(state, config, default_model(), rng);
  const double before = state.relqueries[0].priority;
  testing::start_requests(state, 0, 30);
  testing::complete_requests(state, 0, 10);
  state.iteration = 5;
  const auto s = update_priorities(state, config, default_model(), rng);
  EXPECT_EQ(s.recomputed, 1u);
  EXPECT_LT(state.relqueries[0].priority, before);
  EXPECT_EQ(state.relqueries[0].record->iteration_computed, 5u);
}

TEST_F(DpuFixture, NewArrivalIsComputedFresh) {
  load({{.rel_id = 0, .size = 5}, {.rel_id = 1, .size = 5}});
  state.relqueries[1].admitted = false;
  state.iteration = 1;
  update_priorities(state, config, default_model(), rng);
  EXPECT_FALSE(state.relqueries[1].record.has_value());
  state.relqueries[1].admitted = true;
  state.iteration = 2;
  const auto s = update_priorities(state, config, default_model(), rng);
  EXPECT_EQ(s.reused, 1u);
  EXPECT_EQ(s.recomputed, 1u);
  EXPECT_EQ(state.relqueries[1].record->iteration_computed, 2u);
}

TEST_F(DpuFixture, WaitingQueueSortedByPriority) {
  load({{.rel_id = 0, .size = 40}, {.rel_id = 1, .size = 2}, {.rel_id = 2, .size = 10}});
  state.iteration = 1;
  update_priorities(state, config, default_model(), rng);
  EXPECT_EQ(state.waiting_order, (std::vector<std::uint32_t>{1, 2, 0}));
}

TEST_F(DpuFixture, StarvedRelQueryIsOverridden) {
  load({{.rel_id = 0, .size = 50}});
  state.relqueries[0].priority = 3.0;
  state.clock = time_at(10.0);
  EXPECT_EQ(to_seconds(waiting_time(state.relqueries[0], state.clock)), 10.0);
  EXPECT_TRUE(apply_starvation_override(state, kInf).empty());
  EXPECT_FALSE(state.relqueries[0].overridden);
  const auto ids = apply_starvation_override(state, 0.1);
  ASSERT_EQ(ids.size(), 1u);
  EXPECT_EQ(state.relqueries[0].priority, 0.0);
  EXPECT_TRUE(state.relqueries[0].overridden);
}

TEST_F(DpuFixture, OverrideIsStickyAcrossUpdates) {
  load({{.rel_id = 0, .size = 5}});
  state.iteration = 1;
  update_priorities(state, config, default_model(), rng);
  state.clock = time_at(10.0);
  apply_starvation_override(state, 0.1);
  state.iteration = 2;
  update_priorities(state, config, default_model(), rng);
  EXPECT_EQ(state.relqueries[0].priority, 0.0);
  EXPECT_GT(state.relqueries[0].record->value, 0.0);
  EXPECT_TRUE(apply_starvation_override(state, 0.1).empty());
}

TEST_F(DpuFixture, OverriddenRelQueriesFallBackToArrivalOrder) {
  load({{.rel_id = 0, .size = 1, .arrival_s = 0.2},
        {.rel_id = 1, .size = 1, .arrival_s = 0.5},
        {.rel_id = 2, .size = 1, .arrival_s = 0.9}});
  state.relqueries[0].priority = 5.0;
  state.relqueries[1].priority = 1.0;
  state.relqueries[2].priority = 0.5;
  sort_waiting_queue(state);
  EXPECT_EQ(state.waiting_order, (std::vector<std::uint32_t>{2, 1, 0}));
  state.clock = time_at(1.0);
  // Rel 0 waited 0.8 s, rel 1 0.5 s, rel 2 0.1 s; each has one request.
  const auto ids = apply_starvation_override(state, 0.3);
  EXPECT_EQ(ids.size(), 2u);
  EXPECT_EQ(state.relqueries[0].priority, 0.0);
  EXPECT_EQ(state.relqueries[1].priority, 0.0);
  EXPECT_EQ(state.waiting_order, (std::vector<std::uint32_t>{0, 1, 2}));
}

}  // namespace
}  // namespace rqsim
