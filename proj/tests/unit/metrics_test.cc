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

#include <algorithm>
#include <random>
#include <sstream>

#include "rqsim/errors.h"
#include "rqsim/metrics.h"
#include "scenario.h"

namespace rqsim {
namespace {

TimestampLedger ledger(double a, double s, double e, double d) {
  TimestampLedger l;
  l.arrival = time_at(a);
  l.first_prefill_start = time_at(s);
  l.last_prefill_end = time_at(e);
  l.last_decode_end = time_at(d);
  return l;
}

TEST(Decompose, SplitsIntoThreePhases) {
  const LatencyBreakdown b = decompose(3, ledger(0, 2, 5, 9));
  EXPECT_EQ(b.rel_id, 3u);
  EXPECT_EQ(b.waiting, from_seconds(2));
  EXPECT_EQ(b.core, from_seconds(3));
  EXPECT_EQ(b.tail, from_seconds(4));
  EXPECT_EQ(b.total, from_seconds(9));
}

TEST(Decompose, PrefilledAtArrivalHasNoWaiting) {
  EXPECT_EQ(decompose(0, ledger(1.5, 1.5, 1.7, 2.0)).waiting.count(), 0);
}

TEST(Decompose, IncompleteOrDisorderedLedgerRejected) {
  TimestampLedger l = ledger(0, 2, 5, 9);
  l.last_decode_end.reset();
  EXPECT_THROW(decompose(0, l), IncompleteLedgerError);
  EXPECT_THROW(decompose(0, ledger(0, 5, 2, 9)), IncompleteLedgerError);
}

TEST(Decompose, PartsAlwaysSumToTotal) {
  const auto trace = testing::make_trace({{.rel_id = 0, .size = 9},
                                          {.rel_id = 1, .size = 3, .arrival_s = 0.013},
                                          {.rel_id = 2, .size = 20, .arrival_s = 0.3}});
  const RunResult r = run(trace, testing::make_config(Policy::kRelServe));
  for (const auto& row : relquery_rows(r)) {
    EXPECT_EQ(row.latency.waiting + row.latency.core + row.latency.tail, row.latency.total);
  }
}

RunSummary fake_run(Policy policy, double rate, std::uint64_t seed,
                    std::vector<double> totals, std::uint64_t fingerprint = 1) {
  RunSummary s;
  s.policy = policy;
  s.rate = rate;
  s.seed = seed;
  s.trace_fingerprint = fingerprint;
  RelQueryId id = 0;
  for (double t : totals) {
    RelQueryRow row;
    row.size = 2;
    row.latency.rel_id = id++;
    row.latency.waiting = from_seconds(t / 2);
    row.latency.core = from_seconds(t / 4);
    row.latency.tail = from_seconds(t) - row.latency.waiting - row.latency.core;
    row.latency.total = from_seconds(t);
    s.rows.push_back(row);
  }
  s.input_tokens = 100;
  s.cache_hit_tokens = 40;
  return s;
}

TEST(Summarize, OneRunHasUnitSpeedup) {
  const auto rows = summarize({fake_run(Policy::kFcfs, 1.0, 0, {2, 4})}, Policy::kFcfs);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_DOUBLE_EQ(*rows[0].speedup, 1.0);
  EXPECT_DOUBLE_EQ(rows[0].avg_latency_s, 3.0);
  EXPECT_DOUBLE_EQ(rows[0].max_latency_s, 4.0);
  EXPECT_DOUBLE_EQ(rows[0].waiting_share, 0.5);
  EXPECT_DOUBLE_EQ(rows[0].core_share, 0.25);
  EXPECT_DOUBLE_EQ(rows[0].tail_share, 0.25);
  EXPECT_DOUBLE_EQ(rows[0].avg_unit_waiting_s, 0.75);
  EXPECT_DOUBLE_EQ(rows[0].cache_hit_ratio, 0.4);
}

TEST(Summarize, SpeedupIsBaselineOverPolicy) {
  const auto rows = summarize({fake_run(Policy::kFcfs, 1.0, 0, {30}),
                               fake_run(Policy::kRelServe, 1.0, 0, {12})},
                              Policy::kFcfs);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].policy, Policy::kRelServe);
  EXPECT_DOUBLE_EQ(*rows[1].speedup, 2.5);
}

TEST(Summarize, MissingBaselineLeavesSpeedupEmpty) {
  const auto rows = summarize({fake_run(Policy::kRelServe, 1.0, 0, {12})}, Policy::kFcfs);
  EXPECT_FALSE(rows[0].speedup.has_value());
}

TEST(Summarize, OneRowPerPolicyAndRate) {
  std::vector<RunSummary> runs;
  for (Policy p : {Policy::kFcfs, Policy::kStaticPriority, Policy::kRelServe}) {
    for (double rate : {0.5, 0.6, 0.7, 0.8, 0.9, 1.0}) {
      for (std::uint64_t seed : {0u, 1u}) {
        runs.push_back(fake_run(p, rate, seed, {1, 2, 3}, seed * 10 + 1));
      }
    }
  }
  const auto rows = summarize(runs, Policy::kFcfs);
  ASSERT_EQ(rows.size(), 18u);
  for (Policy p : {Policy::kFcfs, Policy::kStaticPriority, Policy::kRelServe}) {
    EXPECT_EQ(std::count_if(rows.begin(), rows.end(),
                            [&](const SummaryRow& r) { return r.policy == p; }),
              6);
  }
  for (const auto& r : rows) EXPECT_EQ(r.runs, 2u);
}

TEST(Summarize, MaxLatencyAveragesPerRunMaxima) {
  const auto rows = summarize({fake_run(Policy::kFcfs, 1.0, 0, {1, 10}),
                               fake_run(Policy::kFcfs, 1.0, 1, {2, 4}, 2)},
                              Policy::kFcfs);
  EXPECT_DOUBLE_EQ(rows[0].max_latency_s, 7.0);
}

TEST(Summarize, InputOrderDoesNotMatter) {
  std::vector<RunSummary> runs;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> lat(0.1, 50.0);
  for (Policy p : {Policy::kFcfs, Policy::kRelServe}) {
    for (double rate : {0.5, 1.0}) {
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        runs.push_back(fake_run(p, rate, seed, {lat(rng), lat(rng), lat(rng)}, seed + 7));
      }
    }
  }
  std::ostringstream a;
  write_summary_csv(a, summarize(runs, Policy::kFcfs));
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(runs.begin(), runs.end(), rng);
    std::ostringstream b;
    write_summary_csv(b, summarize(runs, Policy::kFcfs));
    EXPECT_EQ(a.str(), b.str());
  }
}

TEST(Summarize, MismatchedTracesRejected) {
  EXPECT_THROW(summarize({fake_run(Policy::kFcfs, 1.0, 0, {3}, 1),
                          fake_run(Policy::kRelServe, 1.0, 0, {2}, 2)},
                         Policy::kFcfs),
               MismatchedTraceError);
  EXPECT_THROW(summarize({}, Policy::kFcfs), ConfigError);
}

TEST(Csv, RelQueryRowsRoundTripExactly) {
  const auto trace = testing::make_trace({{.rel_id = 5, .size = 3},
                                          {.rel_id = 8, .size = 7, .arrival_s = 0.123456789}});
  const RunResult r = run(trace, testing::make_config(Policy::kRelServe));
  const auto rows = relquery_rows(r);
  std::stringstream buf;
  write_relquery_csv(buf, rows);
  EXPECT_EQ(buf.str().substr(0, buf.str().find('\n')),
            "rel_id,size,arrival_s,waiting_s,core_s,tail_s,total_s");
  const auto back = read_relquery_csv(buf);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].size, rows[i].size);
    EXPECT_EQ(back[i].arrival, rows[i].arrival);
    EXPECT_EQ(back[i].latency.rel_id, rows[i].latency.rel_id);
    EXPECT_EQ(back[i].latency.total, rows[i].latency.total);
    EXPECT_EQ(back[i].latency.tail, rows[i].latency.tail);
  }
}

TEST(Csv, InconsistentRowRejected) {
  std::stringstream buf(
      "rel_id,size,arrival_s,waiting_s,core_s,tail_s,total_s\n0,1,0,1,1,1,4\n");
  EXPECT_THROW(read_relquery_csv(buf), SchemaError);
}

TEST(RunInfo, JsonRoundTrip) {
  RunSummary s = fake_run(Policy::kRelServeDP, 0.7, 3, {1}, 0xdeadbeefcafe1234ULL);
  s.iterations = 77;
  s.makespan = SimDuration{123'456'789'012};
  s.scheduler_wall_s = 0.25;
  const RunSummary back = parse_run_info_json(run_info_json(s));
  EXPECT_EQ(back.policy, s.policy);
  EXPECT_EQ(back.rate, s.rate);
  EXPECT_EQ(back.seed, s.seed);
  EXPECT_EQ(back.trace_fingerprint, s.trace_fingerprint);
  EXPECT_EQ(back.iterations, 77u);
  EXPECT_EQ(back.makespan, s.makespan);
  EXPECT_EQ(back.input_tokens, 100u);
  EXPECT_THROW(parse_run_info_json("{\"policy\": \"fcfs\"}"), SchemaError);
}

TEST(RunInfo, OverheadIsSchedulerTimeOverMakespan) {
  RunSummary s;
  s.scheduler_wall_s = 0.5;
  s.makespan = from_seconds(100);
  EXPECT_DOUBLE_EQ(s.overhead_fraction(), 0.005);
  s.makespan = SimDuration{0};
  EXPECT_EQ(s.overhead_fraction(), 0.0);
}

TEST(Decisions, CsvHasOneLinePerIteration) {
  const auto trace = testing::make_trace({{.rel_id = 0, .size = 4, .output_limit = 3}});
  const RunResult r = run(trace, testing::make_config(Policy::kRelServe));
  std::stringstream buf;
  write_decisions_csv(buf, r.decisions);
  const auto lines = std::count(std::istreambuf_iterator<char>(buf),
                                std::istreambuf_iterator<char>(), '\n');
  EXPECT_EQ(static_cast<std::size_t>(lines), r.decisions.size() + 1);
  EXPECT_EQ(r.decisions.size(), r.stats.iterations);
}

}  // namespace
}  // namespace rqsim
