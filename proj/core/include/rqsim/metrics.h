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
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rqsim/engine.h"
#include "rqsim/engine_state.h"
#include "rqsim/sim_time.h"

namespace rqsim {

struct LatencyBreakdown {
  RelQueryId rel_id = 0;
  SimDuration waiting{};
  SimDuration core{};
  SimDuration tail{};
  SimDuration total{};
};

// waiting = first_prefill_start - arrival, core = last_prefill_end -
// first_prefill_start, tail = last_decode_end - last_prefill_end. Throws
// IncompleteLedgerError if a timestamp is missing or out of order.
LatencyBreakdown decompose(RelQueryId rel_id, const TimestampLedger& ledger);

struct RelQueryRow {
  std::uint32_t size = 0;
  SimTime arrival{};
  LatencyBreakdown latency;
};

std::vector<RelQueryRow> relquery_rows(const RunResult& result);

// Columns: rel_id,size,arrival_s,waiting_s,core_s,tail_s,total_s.
void write_relquery_csv(std::ostream& out, const std::vector<RelQueryRow>& rows);
std::vector<RelQueryRow> read_relquery_csv(std::istream& in);

// Columns: iteration,clock_s,case,action,m_plus,m_minus,delta_plus,delta_minus,
// delta_total,batch_requests,batch_uncached_tokens. Absent values are empty.
void write_decisions_csv(std::ostream& out, const std::vector<DecisionRecord>& decisions);

// Everything the aggregate tables need from one run; can be rebuilt from the
// files a finished run leaves on disk.
struct RunSummary {
  Policy policy = Policy::kFcfs;
  double rate = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t trace_fingerprint = 0;
  std::vector<RelQueryRow> rows;
  std::uint64_t input_tokens = 0;
  std::uint64_t cache_hit_tokens = 0;
  std::uint64_t iterations = 0;
  SimDuration makespan{};
  double scheduler_wall_s = 0.0;  // DPU + ABA
  double run_wall_s = 0.0;

  // Scheduler wall time over the simulated end-to-end duration.
  double overhead_fraction() const;
};

RunSummary summarize_run(const RunResult& result);

// run.json: identifiers and counters of one run (wall times included).
std::string run_info_json(const RunSummary& summary);
// Restores everything except rows from run_info_json output.
RunSummary parse_run_info_json(const std::string& text);

struct SummaryRow {
  Policy policy = Policy::kFcfs;
  double rate = 0.0;
  std::size_t runs = 0;
  std::size_t relqueries = 0;
  double avg_latency_s = 0.0;
  double max_latency_s = 0.0;  // per-run maximum, averaged over runs
  double waiting_share = 0.0;  // Σ waiting / Σ total
  double core_share = 0.0;
  double tail_share = 0.0;
  double avg_unit_waiting_s = 0.0;
  double cache_hit_ratio = 0.0;
  std::optional<double> speedup;  // baseline avg / this avg at the same rate
};

// Groups runs by (policy, rate). Runs sharing (rate, seed) must share a trace
// fingerprint, otherwise MismatchedTraceError. The result is sorted by
// (rate, policy) and does not depend on the input order.
std::vector<SummaryRow> summarize(std::vector<RunSummary> runs, Policy baseline);

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
// Long format: policy,rate,metric,value.
void write_summary_long_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
// Columns: policy,rate,seed,iterations,scheduler_wall_s,run_wall_s,makespan_s,
// overhead_fraction.
void write_overhead_csv(std::ostream& out, const std::vector<RunSummary>& runs);

// "%.9g" formatting shared by the CSV writers.
std::string format_number(double value);

}  // namespace rqsim
