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

#include "rqsim/metrics.h"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "rqsim/errors.h"

namespace rqsim {

namespace {

constexpr const char* kRelQueryHeader = "rel_id,size,arrival_s,waiting_s,core_s,tail_s,total_s";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string optional_number(const std::optional<double>& v) {
  return v ? format_number(*v) : std::string();
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
  return buf;
}

}  // namespace

std::string format_number(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", value);
  return buf;
}

LatencyBreakdown decompose(RelQueryId rel_id, const TimestampLedger& ledger) {
  if (!ledger.complete()) {
    throw IncompleteLedgerError("relQuery " + std::to_string(rel_id) +
                                " has an incomplete timestamp ledger");
  }
  const SimTime start = *ledger.first_prefill_start;
  const SimTime prefill_end = *ledger.last_prefill_end;
  const SimTime decode_end = *ledger.last_decode_end;
  if (!(ledger.arrival <= start && start <= prefill_end && prefill_end <= decode_end)) {
    throw IncompleteLedgerError("relQuery " + std::to_string(rel_id) +
                                " has out-of-order timestamps");
  }
  LatencyBreakdown out;
  out.rel_id = rel_id;
  out.waiting = start - ledger.arrival;
  out.core = prefill_end - start;
  out.tail = decode_end - prefill_end;
  out.total = decode_end - ledger.arrival;
  return out;
}

std::vector<RelQueryRow> relquery_rows(const RunResult& result) {
  std::vector<RelQueryRow> rows;
  rows.reserve(result.relqueries.size());
  for (const auto& rq : result.relqueries) {
    rows.push_back({rq.size, rq.ledger.arrival, decompose(rq.rel_id, rq.ledger)});
  }
  return rows;
}

void write_relquery_csv(std::ostream& out, const std::vector<RelQueryRow>& rows) {
  out << kRelQueryHeader << '\n';
  for (const auto& row : rows) {
    const auto& l = row.latency;
    out << l.rel_id << ',' << row.size << ',' << format_seconds(row.arrival) << ','
        << format_seconds(l.waiting) << ',' << format_seconds(l.core) << ','
        << format_seconds(l.tail) << ',' << format_seconds(l.total) << '\n';
  }
}

std::vector<RelQueryRow> read_relquery_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kRelQueryHeader) {
    throw SchemaError("relQuery CSV: unexpected header");
  }
  std::vector<RelQueryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 7) throw SchemaError("relQuery CSV: expected 7 fields in '" + line + "'");
    RelQueryRow row;
    try {
      row.latency.rel_id = static_cast<RelQueryId>(std::stoul(f[0]));
      row.size = static_cast<std::uint32_t>(std::stoul(f[1]));
    } catch (const std::exception&) {
      throw SchemaError("relQuery CSV: bad integer in '" + line + "'");
    }
    row.arrival = kSimEpoch + parse_seconds(f[2]);
    row.latency.waiting = parse_seconds(f[3]);
    row.latency.core = parse_seconds(f[4]);
    row.latency.tail = parse_seconds(f[5]);
    row.latency.total = parse_seconds(f[6]);
    if (row.latency.waiting + row.latency.core + row.latency.tail != row.latency.total) {
      throw SchemaError("relQuery CSV: latency parts do not sum to total in '" + line + "'");
    }
    rows.push_back(row);
  }
  return rows;
}

void write_decisions_csv(std::ostream& out, const std::vector<DecisionRecord>& decisions) {
  out << "iteration,clock_s,case,action,m_plus,m_minus,delta_plus,delta_minus,delta_total,"
         "batch_requests,batch_uncached_tokens\n";
  for (const auto& d : decisions) {
    out << d.iteration << ',' << format_seconds(d.clock) << ',' << to_string(d.tag) << ','
        << to_string(d.action) << ',' << optional_number(d.m_plus) << ','
        << optional_number(d.m_minus) << ',';
    if (d.delta) {
      out << format_number(d.delta->delta_plus) << ',' << format_number(d.delta->delta_minus)
          << ',' << format_number(d.delta->delta_total);
    } else {
      out << ",,";
    }
    out << ',' << d.batch_requests << ',' << d.batch_uncached_tokens << '\n';
  }
}

double RunSummary::overhead_fraction() const {
  const double sim = to_seconds(makespan);
  return sim > 0.0 ? scheduler_wall_s / sim : 0.0;
}

RunSummary summarize_run(const RunResult& result) {
  RunSummary s;
  s.policy = result.policy;
  s.rate = result.rate;
  s.seed = result.seed;
  s.trace_fingerprint = result.trace_fingerprint;
  s.rows = relquery_rows(result);
  s.input_tokens = result.stats.input_tokens;
  s.cache_hit_tokens = result.stats.cache_hit_tokens;
  s.iterations = result.stats.iterations;
  s.makespan = result.stats.makespan();
  s.scheduler_wall_s = result.stats.dpu_wall_s + result.stats.aba_wall_s;
  s.run_wall_s = result.stats.run_wall_s;
  return s;
}

std::string run_info_json(const RunSummary& s) {
  nlohmann::ordered_json j;
  j["policy"] = std::string(policy_name(s.policy));
  j["rate"] = s.rate;
  j["seed"] = s.seed;
  j["trace_fingerprint"] = hex64(s.trace_fingerprint);
  j["input_tokens"] = s.input_tokens;
  j["cache_hit_tokens"] = s.cache_hit_tokens;
  j["iterations"] = s.iterations;
  j["makespan_s"] = format_seconds(s.makespan);
  j["scheduler_wall_s"] = s.scheduler_wall_s;
  j["run_wall_s"] = s.run_wall_s;
  return j.dump(2) + "\n";
}

RunSummary parse_run_info_json(const std::string& text) {
  RunSummary s;
  try {
    const auto j = nlohmann::json::parse(text);
    s.policy = parse_policy(j.at("policy").get<std::string>());
    s.rate = j.at("rate").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.trace_fingerprint =
        std::stoull(j.at("trace_fingerprint").get<std::string>(), nullptr, 16);
    s.input_tokens = j.at("input_tokens").get<std::uint64_t>();
    s.cache_hit_tokens = j.at("cache_hit_tokens").get<std::uint64_t>();
    s.iterations = j.at("iterations").get<std::uint64_t>();
    s.makespan = parse_seconds(j.at("makespan_s").get<std::string>());
    s.scheduler_wall_s = j.at("scheduler_wall_s").get<double>();
    s.run_wall_s = j.at("run_wall_s").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("run info: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw SchemaError("run info: bad trace fingerprint");
  }
  return s;
}

std::vector<SummaryRow> summarize(std::vector<RunSummary> runs, Policy baseline) {
  if (runs.empty()) throw ConfigError("summarize needs at least one run");
  std::sort(runs.begin(), runs.end(), [](const RunSummary& a, const RunSummary& b) {
    return std::make_tuple(a.rate, a.policy, a.seed) < std::make_tuple(b.rate, b.policy, b.seed);
  });

  std::map<std::pair<double, std::uint64_t>, std::uint64_t> fingerprints;
  for (const auto& r : runs) {
    auto [it, inserted] = fingerprints.emplace(std::make_pair(r.rate, r.seed), r.trace_fingerprint);
    if (!inserted && it->second != r.trace_fingerprint) {
      throw MismatchedTraceError("runs at rate " + format_number(r.rate) + " seed " +
                                 std::to_string(r.seed) + " were produced from different traces");
    }
  }

  std::map<std::pair<double, Policy>, SummaryRow> groups;
  struct Sums {
    SimDuration waiting{}, core{}, tail{}, total{};
    double unit_waiting = 0.0;
    double run_max = 0.0;
    std::uint64_t input = 0, hit = 0;
  };
  std::map<std::pair<double, Policy>, Sums> sums;
  for (const auto& r : runs) {
    const auto key = std::make_pair(r.rate, r.policy);
    auto& row = groups[key];
    auto& sum = sums[key];
    row.policy = r.policy;
    row.rate = r.rate;
    ++row.runs;
    SimDuration run_max{};
    for (const auto& q : r.rows) {
      ++row.relqueries;
      sum.waiting += q.latency.waiting;
      sum.core += q.latency.core;
      sum.tail += q.latency.tail;
      sum.total += q.latency.total;
      sum.unit_waiting += to_seconds(q.latency.waiting) / std::max<std::uint32_t>(q.size, 1);
      run_max = std::max(run_max, q.latency.total);
    }
    sum.run_max += to_seconds(run_max);
    sum.input += r.input_tokens;
    sum.hit += r.cache_hit_tokens;
  }

  std::vector<SummaryRow> out;
  for (auto& [key, row] : groups) {
    const auto& sum = sums[key];
    const double total = to_seconds(sum.total);
    if (row.relqueries > 0) {
      row.avg_latency_s = total / static_cast<double>(row.relqueries);
      row.avg_unit_waiting_s = sum.unit_waiting / static_cast<double>(row.relqueries);
    }
    row.max_latency_s = sum.run_max / static_cast<double>(row.runs);
    if (total > 0.0) {
      row.waiting_share = to_seconds(sum.waiting) / total;
      row.core_share = to_seconds(sum.core) / total;
      row.tail_share = to_seconds(sum.tail) / total;
    }
    row.cache_hit_ratio =
        sum.input == 0 ? 0.0 : static_cast<double>(sum.hit) / static_cast<double>(sum.input);
    out.push_back(row);
  }
  for (auto& row : out) {
    const auto it = groups.find(std::make_pair(row.rate, baseline));
    if (it != groups.end() && row.avg_latency_s > 0.0) {
      row.speedup = it->second.avg_latency_s / row.avg_latency_s;
    }
  }
  return out;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "policy,rate,runs,relqueries,avg_latency_s,max_latency_s,waiting_share,core_share,"
         "tail_share,avg_unit_waiting_s,cache_hit_ratio,speedup\n";
  for (const auto& r : rows) {
    out << policy_name(r.policy) << ',' << format_number(r.rate) << ',' << r.runs << ','
        << r.relqueries << ',' << format_number(r.avg_latency_s) << ','
        << format_number(r.max_latency_s) << ',' << format_number(r.waiting_share) << ','
        << format_number(r.core_share) << ',' << format_number(r.tail_share) << ','
        << format_number(r.avg_unit_waiting_s) << ',' << format_number(r.cache_hit_ratio) << ','
        << optional_number(r.speedup) << '\n';
  }
}

void write_summary_long_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "policy,rate,metric,value\n";
  for (const auto& r : rows) {
    const std::string prefix =
        std::string(policy_name(r.policy)) + ',' + format_number(r.rate) + ',';
    auto emit = [&](const char* metric, double value) {
      out << prefix << metric << ',' << format_number(value) << '\n';
    };
    emit("avg_latency_s", r.avg_latency_s);
    emit("max_latency_s", r.max_latency_s);
    emit("waiting_share", r.waiting_share);
    emit("core_share", r.core_share);
    emit("tail_share", r.tail_share);
    emit("avg_unit_waiting_s", r.avg_unit_waiting_s);
    emit("cache_hit_ratio", r.cache_hit_ratio);
    if (r.speedup) emit("speedup", *r.speedup);
  }
}

void write_overhead_csv(std::ostream& out, const std::vector<RunSummary>& runs) {
  out << "policy,rate,seed,iterations,scheduler_wall_s,run_wall_s,makespan_s,"
         "overhead_fraction\n";
  for (const auto& r : runs) {
    out << policy_name(r.policy) << ',' << format_number(r.rate) << ',' << r.seed << ','
        << r.iterations << ',' << format_number(r.scheduler_wall_s) << ','
        << format_number(r.run_wall_s) << ',' << format_seconds(r.makespan) << ','
        << format_number(r.overhead_fraction()) << '\n';
  }
}

}  // namespace rqsim
