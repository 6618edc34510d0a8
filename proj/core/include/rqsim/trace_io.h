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
#include <string>

#include "rqsim/workload.h"

namespace rqsim {

// Line-delimited JSON. The first line is a header object
// {"format":"rqsim-trace","version":1,...}; every following line is one
// relQuery record. Field names are documented in docs/trace_format.md.
void write_trace(std::ostream& out, const ArrivalTrace& trace);
std::string trace_to_string(const ArrivalTrace& trace);

// Tokens are rebuilt with canonical_tokens(). Throws SchemaError.
ArrivalTrace read_trace(std::istream& in);
ArrivalTrace read_trace_file(const std::filesystem::path& path);
void write_trace_file(const std::filesystem::path& path, const ArrivalTrace& trace);

// FNV-1a over the serialized form; equal traces hash equal.
std::uint64_t trace_fingerprint(const ArrivalTrace& trace);

}  // namespace rqsim
