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

#include "rqsim/workload.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "internal/hashing.h"
#include "json.hpp"
#include "rqsim/errors.h"

namespace rqsim {

namespace {

using nlohmann::json;

constexpr std::uint64_t kTableStream = 0x7ab1e;
constexpr std::uint64_t kGapStream = 1;
constexpr std::uint64_t kSizeStream = 2;
constexpr std::uint64_t kPickStream = 3;
constexpr std::uint64_t kOutputStream = 4;

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

Token draw_token(std::mt19937_64& rng, std::uint32_t vocab) {
  return static_cast<Token>(rng() % vocab);
}

std::uint32_t common_prefix(const std::vector<Token>& a,
                            const std::vector<Token>& b) {
  const auto limit = std::min(a.size(), b.size());
  std::size_t i = 0;
  while (i < limit && a[i] == b[i]) ++i;
  return static_cast<std::uint32_t>(i);
}

}  // namespace

std::string_view to_string(QueryType type) {
  switch (type) {
    case QueryType::kFiltering:
      return "filtering";
    case QueryType::kClassification:
      return "classification";
    case QueryType::kRating:
      return "rating";
    case QueryType::kSummarization:
      return "summarization";
    case QueryType::kOpen:
      return "open";
  }
  return "unknown";
}

QueryType parse_query_type(std::string_view name) {
  for (auto type : {QueryType::kFiltering, QueryType::kClassification,
                    QueryType::kRating, QueryType::kSummarization,
                    QueryType::kOpen}) {
    if (to_string(type) == name) return type;
  }
  throw SchemaError("unknown query type: " + std::string(name));
}

std::uint32_t default_output_limit(QueryType type) {
  switch (type) {
    case QueryType::kFiltering:
      return 5;
    case QueryType::kClassification:
      return 10;
    case QueryType::kRating:
      return 5;
    case QueryType::kSummarization:
      return 50;
    case QueryType::kOpen:
      return 100;
  }
  return 0;
}

std::size_t TaskTemplate::literal_prefix_len() const {
  std::size_t n = 0;
  for (const auto& slot : slots) {
    if (!std::holds_alternative<Token>(slot)) break;
    ++n;
  }
  return n;
}

int SynthTable::attribute_index(std::string_view name) const {
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (schema[i] == name) return static_cast<int>(i);
  }
  return -1;
}

void SynthTable::validate() const {
  if (shared_prefix_lens.size() != schema.size()) {
    throw SchemaError("table " + name + ": shared prefix per attribute required");
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != schema.size()) {
      throw SchemaError("table " + name + ": row " + std::to_string(r) +
                        " does not cover the schema");
    }
    for (std::size_t a = 0; a < schema.size(); ++a) {
      if (rows[r][a].size() < shared_prefix_lens[a]) {
        throw SchemaError("table " + name + ": value shorter than shared prefix");
      }
    }
  }
}

std::vector<Token> template_shared_prefix(const SynthTable& table,
                                          const TaskTemplate& task) {
  std::vector<Token> prefix;
  for (const auto& slot : task.slots) {
    if (const auto* literal = std::get_if<Token>(&slot)) {
      prefix.push_back(*literal);
      continue;
    }
    const auto& ref = std::get<AttributeRef>(slot);
    const int attr = table.attribute_index(ref.name);
    if (attr < 0) throw SchemaError("unknown attribute placeholder: " + ref.name);
    if (!table.rows.empty()) {
      const auto& value = table.rows.front()[attr];
      prefix.insert(prefix.end(), value.begin(),
                    value.begin() + table.shared_prefix_lens[attr]);
    }
    break;
  }
  return prefix;
}

RelQuery instantiate_relquery(const SynthTable& table,
                              const TaskTemplate& task, RowRange rows,
                              RelQueryId rel_id, SimTime arrival) {
  if (task.output_limit == 0) {
    throw SchemaError("template " + task.key + ": output_limit must be positive");
  }
  std::vector<int> slot_attr(task.slots.size(), -1);
  bool has_placeholder = false;
  for (std::size_t s = 0; s < task.slots.size(); ++s) {
    if (const auto* ref = std::get_if<AttributeRef>(&task.slots[s])) {
      slot_attr[s] = table.attribute_index(ref->name);
      if (slot_attr[s] < 0) {
        throw SchemaError("template " + task.key +
                          ": unknown attribute placeholder " + ref->name);
      }
      has_placeholder = true;
    }
  }
  if (!has_placeholder) {
    throw SchemaError("template " + task.key + " references no attribute");
  }
  if (rows.count == 0 || rows.first + rows.count > table.rows.size()) {
    throw SchemaError("row range outside table " + table.name);
  }

  const auto shared = template_shared_prefix(table, task);
  RelQuery rq;
  rq.rel_id = rel_id;
  rq.template_key = task.key;
  rq.query_type = task.query_type;
  rq.output_limit = task.output_limit;
  rq.arrival = arrival;
  rq.size = static_cast<std::uint32_t>(rows.count);
  rq.requests.reserve(rows.count);
  for (std::size_t i = 0; i < rows.count; ++i) {
    const auto& row = table.rows[rows.first + i];
    Request req;
    req.rel_id = rel_id;
    req.req_id = static_cast<RequestId>(i);
    for (std::size_t s = 0; s < task.slots.size(); ++s) {
      if (slot_attr[s] < 0) {
        req.tokens.push_back(std::get<Token>(task.slots[s]));
      } else {
        const auto& value = row[slot_attr[s]];
        req.tokens.insert(req.tokens.end(), value.begin(), value.end());
      }
    }
    req.output_limit = task.output_limit;
    req.actual_output_len = task.output_limit;
    req.arrival = arrival;
    req.shared_prefix_len = common_prefix(req.tokens, shared);
    rq.requests.push_back(std::move(req));
  }
  return rq;
}

std::size_t ArrivalTrace::total_requests() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.requests.size();
  return n;
}

// ---------------------------------------------------------------------------
// Presets

TablePreset parse_table_preset(std::string_view json_text) {
  TablePreset preset;
  try {
    const auto doc = json::parse(json_text);
    preset.name = doc.at("name").get<std::string>();
    preset.mean_input_len = doc.at("mean_input_len").get<std::uint32_t>();
    preset.num_rows = doc.at("num_rows").get<std::uint32_t>();
    preset.vocab_size = doc.value("vocab_size", 32000u);
    for (const auto& a : doc.at("attributes")) {
      preset.attributes.push_back({a.at("name").get<std::string>(),
                                   a.at("mean_len").get<std::uint32_t>(),
                                   a.value("shared_prefix_len", 0u)});
    }
    for (const auto& t : doc.at("templates")) {
      TemplateSpec spec;
      spec.query_type = parse_query_type(t.at("query_type").get<std::string>());
      spec.prefix_len = t.at("prefix_len").get<std::uint32_t>();
      spec.separator_len = t.value("separator_len", 0u);
      spec.suffix_len = t.value("suffix_len", 0u);
      spec.slots = t.at("slots").get<std::vector<std::string>>();
      preset.templates.push_back(std::move(spec));
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed table preset: ") + e.what());
  }
  if (preset.attributes.empty() || preset.templates.empty() ||
      preset.num_rows == 0 || preset.vocab_size < 2) {
    throw SchemaError("table preset " + preset.name + " is incomplete");
  }
  for (const auto& spec : preset.templates) {
    if (spec.slots.empty()) {
      throw SchemaError("table preset " + preset.name +
                        ": template without placeholders");
    }
    for (const auto& slot : spec.slots) {
      const bool known = std::any_of(
          preset.attributes.begin(), preset.attributes.end(),
          [&](const AttributeSpec& a) { return a.name == slot; });
      if (!known) {
        throw SchemaError("table preset " + preset.name +
                          ": unknown attribute placeholder " + slot);
      }
    }
  }
  return preset;
}

TablePreset load_table_preset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open table preset " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_table_preset(buf.str());
}

TablePreset find_table_preset(const std::filesystem::path& preset_dir,
                              std::string_view name) {
  const auto path = preset_dir / "tables" / (std::string(name) + ".json");
  if (!std::filesystem::exists(path)) {
    throw SchemaError("unknown workload preset '" + std::string(name) +
                      "' (looked for " + path.string() + ")");
  }
  return load_table_preset(path);
}

SynthTable build_table(const TablePreset& preset, std::uint64_t seed) {
  SynthTable table;
  table.name = preset.name;
  for (const auto& attr : preset.attributes) {
    table.schema.push_back(attr.name);
    table.shared_prefix_lens.push_back(attr.shared_prefix_len);
  }

  // Shared prefixes depend only on the preset, so every trace built from it
  // agrees on them.
  std::vector<std::vector<Token>> shared(preset.attributes.size());
  for (std::size_t a = 0; a < preset.attributes.size(); ++a) {
    auto rng = make_rng(internal::fnv1a(preset.name + "/" + preset.attributes[a].name),
                        kTableStream);
    for (std::uint32_t k = 0; k < preset.attributes[a].shared_prefix_len; ++k) {
      shared[a].push_back(draw_token(rng, preset.vocab_size));
    }
  }

  auto rng = make_rng(seed ^ internal::fnv1a(preset.name), kTableStream);
  table.rows.resize(preset.num_rows);
  for (auto& row : table.rows) {
    row.resize(preset.attributes.size());
    for (std::size_t a = 0; a < preset.attributes.size(); ++a) {
      const auto& spec = preset.attributes[a];
      const std::uint32_t lo = std::max(spec.shared_prefix_len + 1, spec.mean_len / 2);
      const std::uint32_t hi = std::max(lo, spec.mean_len + spec.mean_len / 2);
      std::uniform_int_distribution<std::uint32_t> len_dist(lo, hi);
      const std::uint32_t len = len_dist(rng);
      auto& value = row[a];
      value = shared[a];
      while (value.size() < len) value.push_back(draw_token(rng, preset.vocab_size));
    }
  }
  table.validate();
  return table;
}

TaskTemplate build_template(const TablePreset& preset, const TemplateSpec& spec) {
  TaskTemplate task;
  task.key = preset.name + "/" + std::string(to_string(spec.query_type));
  task.query_type = spec.query_type;
  task.output_limit = default_output_limit(spec.query_type);
  auto rng = make_rng(internal::fnv1a(task.key), kTableStream);
  auto literals = [&](std::uint32_t n) {
    for (std::uint32_t i = 0; i < n; ++i) {
      task.slots.emplace_back(draw_token(rng, preset.vocab_size));
    }
  };
  literals(spec.prefix_len);
  for (std::size_t i = 0; i < spec.slots.size(); ++i) {
    if (i > 0) literals(spec.separator_len);
    task.slots.emplace_back(AttributeRef{spec.slots[i]});
  }
  literals(spec.suffix_len);
  return task;
}

// ---------------------------------------------------------------------------
// Traces

void TraceConfig::validate() const {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw ConfigError("arrival rate must be positive and finite");
  }
  if (num_relqueries == 0) throw ConfigError("num_relqueries must be positive");
  if (size_min == 0 || size_min > size_max) {
    throw ConfigError("size range must satisfy 1 <= min <= max");
  }
  if (size_max > preset.num_rows) {
    throw ConfigError("size range exceeds the table's row count");
  }
  if (preset.templates.empty()) throw ConfigError("preset has no templates");
}

ArrivalTrace generate_trace(const TraceConfig& config) {
  config.validate();
  const SynthTable table = build_table(config.preset, config.seed);
  std::vector<TaskTemplate> templates;
  for (const auto& spec : config.preset.templates) {
    templates.push_back(build_template(config.preset, spec));
  }

  auto gap_rng = make_rng(config.seed, kGapStream);
  auto size_rng = make_rng(config.seed, kSizeStream);
  auto pick_rng = make_rng(config.seed, kPickStream);
  auto out_rng = make_rng(config.seed, kOutputStream);
  std::exponential_distribution<double> unit_gap(1.0);
  std::uniform_int_distribution<std::uint32_t> size_dist(config.size_min,
                                                         config.size_max);
  std::uniform_int_distribution<std::size_t> template_dist(0, templates.size() - 1);

  ArrivalTrace trace;
  trace.rate = config.rate;
  trace.seed = config.seed;
  trace.preset = config.preset.name;
  trace.vocab_size = config.preset.vocab_size;
  trace.entries.reserve(config.num_relqueries);

  double unit_clock = 0.0;
  for (std::size_t i = 0; i < config.num_relqueries; ++i) {
    unit_clock += unit_gap(gap_rng);
    const SimTime arrival = time_at(unit_clock / config.rate);
    const std::uint32_t size = size_dist(size_rng);
    const auto& task = templates[template_dist(pick_rng)];
    std::uniform_int_distribution<std::size_t> first_dist(0, table.rows.size() - size);
    const RowRange rows{first_dist(pick_rng), size};
    auto rq = instantiate_relquery(table, task, rows, static_cast<RelQueryId>(i),
                                   arrival);
    const std::uint32_t lo = std::max<std::uint32_t>(1, rq.output_limit / 2);
    std::uniform_int_distribution<std::uint32_t> out_dist(lo, rq.output_limit);
    for (auto& req : rq.requests) req.actual_output_len = out_dist(out_rng);
    trace.entries.push_back(std::move(rq));
  }
  canonicalize(trace);
  return trace;
}

std::vector<Token> canonical_tokens(std::string_view template_key,
                                    std::uint32_t prefix_len,
                                    std::uint32_t tok, RelQueryId rel_id,
                                    RequestId req_id, std::uint32_t vocab_size) {
  const std::uint64_t key_hash = internal::fnv1a(template_key);
  const std::uint64_t own_hash = internal::hash_combine(
      internal::hash_combine(key_hash, rel_id), req_id);
  std::vector<Token> tokens(tok);
  for (std::uint32_t k = 0; k < tok; ++k) {
    const std::uint64_t h = k < prefix_len
                                ? internal::hash_combine(key_hash, k)
                                : internal::hash_combine(own_hash, k);
    tokens[k] = static_cast<Token>(h % vocab_size);
  }
  return tokens;
}

void canonicalize(ArrivalTrace& trace) {
  for (auto& rq : trace.entries) {
    for (auto& req : rq.requests) {
      req.tokens = canonical_tokens(rq.template_key, req.shared_prefix_len,
                                    req.tok(), rq.rel_id, req.req_id,
                                    trace.vocab_size);
    }
  }
}

}  // namespace rqsim
