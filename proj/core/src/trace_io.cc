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

#include "rqsim/trace_io.h"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "internal/hashing.h"
#include "json.hpp"
#include "rqsim/errors.h"

namespace rqsim {

namespace {

using nlohmann::ordered_json;

constexpr const char* kFormat = "rqsim-trace";
constexpr int kVersion = 1;

// Seconds are written as exact decimal strings of the nanosecond clock and
// parsed back without floating round trips.
ordered_json seconds_value(SimTime t) {
  return ordered_json::parse(format_seconds(t));
}

SimTime parse_time(const ordered_json& v) {
  if (!v.is_number()) throw SchemaError("arrival_s must be a number");
  return kSimEpoch + from_seconds(v.get<double>());
}

}  // namespace

void write_trace(std::ostream& out, const ArrivalTrace& trace) {
  ordered_json header;
  header["format"] = kFormat;
  header["version"] = kVersion;
  header["preset"] = trace.preset;
  header["rate"] = trace.rate;
  header["seed"] = trace.seed;
  header["vocab_size"] = trace.vocab_size;
  header["num_relqueries"] = trace.entries.size();
  out << header.dump() << '\n';

  for (const auto& rq : trace.entries) {
    ordered_json rec;
    rec["rel_id"] = rq.rel_id;
    rec["arrival_s"] = seconds_value(rq.arrival);
    rec["size"] = rq.size;
    rec["output_limit"] = rq.output_limit;
    rec["query_type"] = std::string(to_string(rq.query_type));
    rec["template_key"] = rq.template_key;
    auto tok = ordered_json::array();
    auto prefix = ordered_json::array();
    auto out_len = ordered_json::array();
    for (const auto& req : rq.requests) {
      tok.push_back(req.tok());
      prefix.push_back(req.shared_prefix_len);
      out_len.push_back(req.actual_output_len);
    }
    rec["tokens"] = std::move(tok);
    rec["prefix_lens"] = std::move(prefix);
    rec["output_lens"] = std::move(out_len);
    out << rec.dump() << '\n';
  }
}

std::string trace_to_string(const ArrivalTrace& trace) {
  std::ostringstream out;
  write_trace(out, trace);
  return out.str();
}

ArrivalTrace read_trace(std::istream& in) {
  ArrivalTrace trace;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::size_t expected = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json rec;
    try {
      rec = ordered_json::parse(line);
    } catch (const ordered_json::exception& e) {
      throw SchemaError("trace line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      if (!have_header) {
        if (rec.value("format", "") != kFormat) {
          throw SchemaError("not an rqsim trace (missing header)");
        }
        if (rec.at("version").get<int>() != kVersion) {
          throw SchemaError("unsupported trace version");
        }
        trace.preset = rec.value("preset", "");
        trace.rate = rec.at("rate").get<double>();
        trace.seed = rec.at("seed").get<std::uint64_t>();
        trace.vocab_size = rec.value("vocab_size", 32000u);
        expected = rec.value("num_relqueries", std::size_t{0});
        have_header = true;
        continue;
      }
      RelQuery rq;
      rq.rel_id = rec.at("rel_id").get<RelQueryId>();
      rq.arrival = parse_time(rec.at("arrival_s"));
      rq.size = rec.at("size").get<std::uint32_t>();
      rq.output_limit = rec.at("output_limit").get<std::uint32_t>();
      rq.query_type = parse_query_type(rec.at("query_type").get<std::string>());
      rq.template_key = rec.at("template_key").get<std::string>();
      const auto tok = rec.at("tokens").get<std::vector<std::uint32_t>>();
      const auto prefix = rec.at("prefix_lens").get<std::vector<std::uint32_t>>();
      const auto out_len = rec.at("output_lens").get<std::vector<std::uint32_t>>();
      if (tok.size() != prefix.size() || tok.size() != out_len.size() ||
          tok.size() != rq.size || tok.empty()) {
        throw SchemaError("per-request arrays disagree with size");
      }
      if (rq.output_limit == 0) throw SchemaError("output_limit must be positive");
      for (std::size_t i = 0; i < tok.size(); ++i) {
        if (tok[i] == 0 || prefix[i] > tok[i]) {
          throw SchemaError("request token counts are inconsistent");
        }
        if (out_len[i] == 0 || out_len[i] > rq.output_limit) {
          throw SchemaError("output length outside [1, output_limit]");
        }
        Request req;
        req.rel_id = rq.rel_id;
        req.req_id = static_cast<RequestId>(i);
        req.output_limit = rq.output_limit;
        req.actual_output_len = out_len[i];
        req.arrival = rq.arrival;
        req.shared_prefix_len = prefix[i];
        req.tokens = canonical_tokens(rq.template_key, prefix[i], tok[i],
                                      rq.rel_id, req.req_id, trace.vocab_size);
        rq.requests.push_back(std::move(req));
      }
      if (!trace.entries.empty()) {
        const auto& prev = trace.entries.back();
        if (rq.arrival < prev.arrival ||
            (rq.arrival == prev.arrival && rq.rel_id <= prev.rel_id)) {
          throw SchemaError("trace records are not sorted by arrival");
        }
      }
      trace.entries.push_back(std::move(rq));
    } catch (const ordered_json::exception& e) {
      throw SchemaError("trace line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw SchemaError("empty trace");
  if (expected != 0 && expected != trace.entries.size()) {
    throw SchemaError("trace is truncated");
  }
  return trace;
}

ArrivalTrace read_trace_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open trace " + path.string());
  return read_trace(in);
}

void write_trace_file(const std::filesystem::path& path, const ArrivalTrace& trace) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write trace " + path.string());
  write_trace(out, trace);
  if (!out) throw std::runtime_error("failed writing trace " + path.string());
}

std::uint64_t trace_fingerprint(const ArrivalTrace& trace) {
  return internal::fnv1a(trace_to_string(trace));
}

}  // namespace rqsim
