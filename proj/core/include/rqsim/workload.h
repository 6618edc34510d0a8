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
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rqsim/sim_time.h"

namespace rqsim {

using Token = std::uint32_t;
using RelQueryId = std::uint32_t;
using RequestId = std::uint32_t;

enum class QueryType { kFiltering, kClassification, kRating, kSummarization, kOpen };

std::string_view to_string(QueryType type);
// Throws SchemaError for unknown names.
QueryType parse_query_type(std::string_view name);
// Output-length limits per task type: 5, 10, 5, 50 and 100 tokens.
std::uint32_t default_output_limit(QueryType type);

struct AttributeRef {
  std::string name;
  friend bool operator==(const AttributeRef&, const AttributeRef&) = default;
};

// A template slot is either a literal token or a placeholder for an attribute.
using TemplateSlot = std::variant<Token, AttributeRef>;

struct TaskTemplate {
  std::string key;  // "<table>/<query type>", identifies the shared prefix
  QueryType query_type = QueryType::kFiltering;
  std::vector<TemplateSlot> slots;
  std::uint32_t output_limit = 0;

  // Number of literal tokens before the first placeholder.
  std::size_t literal_prefix_len() const;
};

struct SynthTable {
  std::string name;
  std::vector<std::string> schema;
  // Tokens common to every value of an attribute, one entry per attribute.
  std::vector<std::uint32_t> shared_prefix_lens;
  // rows[row][attribute] -> value tokens.
  std::vector<std::vector<std::vector<Token>>> rows;

  // Index of `name` in schema, or -1.
  int attribute_index(std::string_view name) const;
  // Throws SchemaError when an invariant is broken.
  void validate() const;
};

struct Request {
  RelQueryId rel_id = 0;
  RequestId req_id = 0;
  std::vector<Token> tokens;
  std::uint32_t output_limit = 0;
  std::uint32_t actual_output_len = 0;
  std::uint32_t generated = 0;
  double priority = 0.0;
  SimTime arrival{};
  // Leading tokens shared with the template's common prefix.
  std::uint32_t shared_prefix_len = 0;

  std::uint32_t tok() const { return static_cast<std::uint32_t>(tokens.size()); }
  friend bool operator==(const Request&, const Request&) = default;
};

struct RelQuery {
  RelQueryId rel_id = 0;
  std::string template_key;
  QueryType query_type = QueryType::kFiltering;
  std::vector<Request> requests;
  std::uint32_t output_limit = 0;
  SimTime arrival{};
  std::uint32_t size = 0;  // original request count

  friend bool operator==(const RelQuery&, const RelQuery&) = default;
};

struct ArrivalTrace {
  std::vector<RelQuery> entries;  // sorted by (arrival, rel_id)
  double rate = 0.0;
  std::uint64_t seed = 0;
  std::string preset;
  std::uint32_t vocab_size = 32000;

  std::size_t total_requests() const;
  friend bool operator==(const ArrivalTrace&, const ArrivalTrace&) = default;
};

struct RowRange {
  std::size_t first = 0;
  std::size_t count = 0;
};

// One request per row; placeholders are replaced by that row's attribute
// tokens in template order. Throws SchemaError on unknown placeholders or an
// out-of-range row span.
RelQuery instantiate_relquery(const SynthTable& table,
                              const TaskTemplate& task, RowRange rows,
                              RelQueryId rel_id, SimTime arrival);

// Literal prefix plus the shared prefix of the first substituted attribute:
// the tokens every request of a relQuery has in common.
std::vector<Token> template_shared_prefix(const SynthTable& table,
                                          const TaskTemplate& task);

// ---------------------------------------------------------------------------
// Table presets

struct AttributeSpec {
  std::string name;
  std::uint32_t mean_len = 0;
  std::uint32_t shared_prefix_len = 0;
};

struct TemplateSpec {
  QueryType query_type = QueryType::kFiltering;
  std::uint32_t prefix_len = 0;
  std::uint32_t separator_len = 0;
  std::uint32_t suffix_len = 0;
  std::vector<std::string> slots;  // attribute names in template order
};

struct TablePreset {
  std::string name;
  std::uint32_t mean_input_len = 0;
  std::uint32_t num_rows = 0;
  std::uint32_t vocab_size = 32000;
  std::vector<AttributeSpec> attributes;
  std::vector<TemplateSpec> templates;
};

TablePreset parse_table_preset(std::string_view json_text);
TablePreset load_table_preset(const std::filesystem::path& path);
// Looks up "<dir>/tables/<name>.json". Throws SchemaError if missing.
TablePreset find_table_preset(const std::filesystem::path& preset_dir,
                              std::string_view name);

SynthTable build_table(const TablePreset& preset, std::uint64_t seed);
TaskTemplate build_template(const TablePreset& preset, const TemplateSpec& spec);

// ---------------------------------------------------------------------------
// Trace generation

struct TraceConfig {
  TablePreset preset;
  std::size_t num_relqueries = 100;
  std::uint32_t size_min = 1;
  std::uint32_t size_max = 100;
  double rate = 1.0;  // relQueries per second
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
};

// Poisson arrivals, uniform relQuery sizes and uniform templates. Inter-arrival
// gaps are unit exponentials scaled by 1/rate, so traces that differ only in
// rate share every other draw. The result is in canonical token form.
ArrivalTrace generate_trace(const TraceConfig& config);

// Deterministic token sequence for a request described only by counts: the
// template's canonical prefix followed by request-unique tokens.
std::vector<Token> canonical_tokens(std::string_view template_key,
                                    std::uint32_t prefix_len,
                                    std::uint32_t tok, RelQueryId rel_id,
                                    RequestId req_id, std::uint32_t vocab_size);

// Rewrites every request's tokens into canonical form (counts preserved).
void canonicalize(ArrivalTrace& trace);

}  // namespace rqsim
