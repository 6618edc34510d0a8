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
#include <numeric>
#include <sstream>

#include "rqsim/errors.h"
#include "rqsim/sim_time.h"
#include "rqsim/trace_io.h"
#include "rqsim/workload.h"

namespace rqsim {
namespace {

const std::filesystem::path kPresetDir = RQSIM_TEST_PRESET_DIR;

SynthTable tiny_table() {
  SynthTable t;
  t.name = "tiny";
  t.schema = {"A", "B"};
  t.shared_prefix_lens = {0, 0};
  t.rows = {{{101, 102}, {201}}, {{111, 112}, {211}}, {{121, 122}, {221}}};
  return t;
}

TaskTemplate tiny_template(std::vector<TemplateSlot> slots) {
  TaskTemplate task;
  task.key = "tiny/open";
  task.query_type = QueryType::kOpen;
  task.slots = std::move(slots);
  task.output_limit = 7;
  return task;
}

TEST(SimTime, SecondsRoundTripExactly) {
  EXPECT_EQ(from_seconds(1.5).count(), 1'500'000'000);
  EXPECT_EQ(format_seconds(SimDuration{1'234'567'891}), "1.234567891");
  EXPECT_EQ(parse_seconds("1.234567891").count(), 1'234'567'891);
  EXPECT_EQ(parse_seconds(format_seconds(SimDuration{42})).count(), 42);
  EXPECT_EQ(from_seconds(-3.0).count(), 0);
}

TEST(Instantiate, SubstitutesPlaceholderTokens) {
  const auto task = tiny_template({Token{1}, Token{2}, AttributeRef{"A"}});
  const RelQuery rq = instantiate_relquery(tiny_table(), task, {0, 1}, 5, time_at(1.0));
  ASSERT_EQ(rq.requests.size(), 1u);
  EXPECT_EQ(rq.requests[0].tokens, (std::vector<Token>{1, 2, 101, 102}));
  EXPECT_EQ(rq.requests[0].rel_id, 5u);
  EXPECT_EQ(rq.requests[0].output_limit, 7u);
}

TEST(Instantiate, ThreeRowsShareTheLiteralPrefix) {
  const auto task = tiny_template({Token{1}, Token{2}, AttributeRef{"A"}, Token{3},
                                   AttributeRef{"B"}});
  const RelQuery rq = instantiate_relquery(tiny_table(), task, {0, 3}, 0, kSimEpoch);
  ASSERT_EQ(rq.size, 3u);
  ASSERT_EQ(rq.requests.size(), 3u);
  for (const auto& r : rq.requests) {
    EXPECT_EQ(r.tokens[0], 1u);
    EXPECT_EQ(r.tokens[1], 2u);
    EXPECT_GE(r.shared_prefix_len, 2u);
    EXPECT_EQ(r.arrival, rq.arrival);
  }
  EXPECT_EQ(rq.requests[2].tokens, (std::vector<Token>{1, 2, 121, 122, 3, 221}));
}

TEST(Instantiate, UnknownPlaceholderIsSchemaError) {
  const auto task = tiny_template({Token{1}, AttributeRef{"missing"}});
  EXPECT_THROW(instantiate_relquery(tiny_table(), task, {0, 1}, 0, kSimEpoch), SchemaError);
}

TEST(Instantiate, TemplateWithoutPlaceholderIsSchemaError) {
  const auto task = tiny_template({Token{1}, Token{2}});
  EXPECT_THROW(instantiate_relquery(tiny_table(), task, {0, 1}, 0, kSimEpoch), SchemaError);
}

TEST(Instantiate, RatingTemplateOverBeerHasLimitFive) {
  const TablePreset preset = find_table_preset(kPresetDir, "beer");
  const SynthTable table = build_table(preset, 3);
  for (const auto& spec : preset.templates) {
    if (spec.query_type != QueryType::kRating) continue;
    const auto task = build_template(preset, spec);
    const RelQuery rq = instantiate_relquery(table, task, {10, 20}, 1, kSimEpoch);
    for (const auto& r : rq.requests) EXPECT_EQ(r.output_limit, 5u);
  }
}

TEST(OutputLimits, FollowQueryTypes) {
  EXPECT_EQ(default_output_limit(QueryType::kFiltering), 5u);
  EXPECT_EQ(default_output_limit(QueryType::kClassification), 10u);
  EXPECT_EQ(default_output_limit(QueryType::kRating), 5u);
  EXPECT_EQ(default_output_limit(QueryType::kSummarization), 50u);
  EXPECT_EQ(default_output_limit(QueryType::kOpen), 100u);
  EXPECT_EQ(parse_query_type("summarization"), QueryType::kSummarization);
  EXPECT_THROW(parse_query_type("poetry"), SchemaError);
}

TraceConfig config_for(const std::string& preset, double rate, std::uint64_t seed) {
  TraceConfig c;
  c.preset = find_table_preset(kPresetDir, preset);
  c.rate = rate;
  c.seed = seed;
  return c;
}

TEST(GenerateTrace, HundredRelQueriesAboutFiveThousandRequests) {
  const ArrivalTrace t = generate_trace(config_for("rotten", 1.0, 7));
  ASSERT_EQ(t.entries.size(), 100u);
  EXPECT_GT(t.total_requests(), 4000u);
  EXPECT_LT(t.total_requests(), 6000u);
  const double mean_gap = to_seconds(t.entries.back().arrival) / 100.0;
  EXPECT_NEAR(mean_gap, 1.0, 0.25);
  for (std::size_t i = 1; i < t.entries.size(); ++i) {
    EXPECT_LE(t.entries[i - 1].arrival, t.entries[i].arrival);
  }
}

TEST(GenerateTrace, HugeRateCollapsesArrivals) {
  const ArrivalTrace t = generate_trace(config_for("amazon", 1e6, 1));
  EXPECT_LT(to_seconds(t.entries.back().arrival), 1e-3);
}

TEST(GenerateTrace, SameSeedSameTrace) {
  const ArrivalTrace a = generate_trace(config_for("pdmx", 0.8, 11));
  const ArrivalTrace b = generate_trace(config_for("pdmx", 0.8, 11));
  EXPECT_EQ(a, b);
  EXPECT_EQ(trace_to_string(a), trace_to_string(b));
  const ArrivalTrace c = generate_trace(config_for("pdmx", 0.8, 12));
  EXPECT_NE(trace_to_string(a), trace_to_string(c));
}

TEST(GenerateTrace, MeanGapConvergesToInverseRate) {
  TraceConfig c = config_for("beer", 2.0, 5);
  c.num_relqueries = 10000;
  c.size_min = 1;
  c.size_max = 1;
  const ArrivalTrace t = generate_trace(c);
  const double mean_gap = to_seconds(t.entries.back().arrival) / 10000.0;
  EXPECT_NEAR(mean_gap, 0.5, 0.05);
}

TEST(GenerateTrace, RequestsRespectInvariants) {
  const ArrivalTrace t = generate_trace(config_for("amazon", 1.0, 2));
  for (const auto& rq : t.entries) {
    EXPECT_GE(rq.size, 1u);
    EXPECT_LE(rq.size, 100u);
    EXPECT_EQ(rq.size, rq.requests.size());
    EXPECT_EQ(rq.output_limit, default_output_limit(rq.query_type));
    const std::uint32_t lo = std::max<std::uint32_t>(1, rq.output_limit / 2);
    for (const auto& r : rq.requests) {
      EXPECT_EQ(r.rel_id, rq.rel_id);
      EXPECT_EQ(r.arrival, rq.arrival);
      EXPECT_EQ(r.output_limit, rq.output_limit);
      EXPECT_GE(r.actual_output_len, lo);
      EXPECT_LE(r.actual_output_len, r.output_limit);
      EXPECT_EQ(r.generated, 0u);
      EXPECT_FALSE(r.tokens.empty());
    }
  }
}

TEST(GenerateTrace, RequestsOfARelQueryShareTheTemplatePrefix) {
  const TablePreset preset = find_table_preset(kPresetDir, "amazon");
  const ArrivalTrace t = generate_trace(config_for("amazon", 1.0, 4));
  for (const auto& rq : t.entries) {
    std::uint32_t literal = 0;
    for (const auto& spec : preset.templates) {
      if (spec.query_type == rq.query_type) literal = spec.prefix_len;
    }
    const auto& first = rq.requests.front().tokens;
    for (const auto& r : rq.requests) {
      std::uint32_t common = 0;
      while (common < r.tokens.size() && common < first.size() &&
             r.tokens[common] == first[common]) {
        ++common;
      }
      EXPECT_GE(common, literal);
    }
  }
}

TEST(GenerateTrace, MeanInputLengthsMatchPresets) {
  for (const auto& [name, mean] : std::vector<std::pair<std::string, double>>{
           {"amazon", 234}, {"rotten", 215}, {"beer", 174}, {"pdmx", 158}}) {
    const ArrivalTrace t = generate_trace(config_for(name, 1.0, 9));
    double sum = 0.0;
    for (const auto& rq : t.entries) {
      for (const auto& r : rq.requests) sum += r.tok();
    }
    EXPECT_NEAR(sum / static_cast<double>(t.total_requests()), mean, 0.05 * mean) << name;
  }
}

TEST(GenerateTrace, InvalidConfigRejected) {
  TraceConfig c = config_for("amazon", 0.0, 0);
  EXPECT_THROW(generate_trace(c), ConfigError);
  c.rate = 1.0;
  c.size_min = 5;
  c.size_max = 4;
  EXPECT_THROW(generate_trace(c), ConfigError);
}

TEST(Presets, MissingPresetIsSchemaError) {
  EXPECT_THROW(find_table_preset(kPresetDir, "imdb"), SchemaError);
  EXPECT_THROW(parse_table_preset("{\"name\": 3}"), SchemaError);
}

TEST(TraceIo, RoundTripIsExact) {
  const ArrivalTrace t = generate_trace(config_for("beer", 0.7, 21));
  std::stringstream buf;
  write_trace(buf, t);
  const ArrivalTrace back = read_trace(buf);
  EXPECT_EQ(back, t);
  EXPECT_EQ(trace_fingerprint(back), trace_fingerprint(t));
}

TEST(TraceIo, MalformedInputRejected) {
  std::stringstream bad("{\"format\":\"something-else\"}\n");
  EXPECT_THROW(read_trace(bad), SchemaError);
  std::stringstream truncated(trace_to_string(generate_trace(config_for("beer", 1.0, 1)))
                                  .substr(0, 400));
  EXPECT_THROW(read_trace(truncated), SchemaError);
}

}  // namespace
}  // namespace rqsim
