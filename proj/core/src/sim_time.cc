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

#include "rqsim/sim_time.h"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace rqsim {

SimDuration from_seconds(double seconds) {
  if (!(seconds > 0.0)) return SimDuration::zero();
  return SimDuration(std::llround(seconds * 1e9));
}

std::string format_seconds(SimDuration d) {
  auto ns = d.count();
  const bool negative = ns < 0;
  if (negative) ns = -ns;
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%s%lld.%09lld", negative ? "-" : "",
                static_cast<long long>(ns / 1'000'000'000),
                static_cast<long long>(ns % 1'000'000'000));
  return buf;
}

SimDuration parse_seconds(std::string_view text) {
  if (text.empty()) throw std::invalid_argument("empty seconds value");
  bool negative = false;
  std::size_t pos = 0;
  if (text[0] == '-') {
    negative = true;
    pos = 1;
  }
  std::int64_t whole = 0;
  std::int64_t frac = 0;
  int frac_digits = 0;
  bool seen_digit = false;
  bool in_frac = false;
  for (; pos < text.size(); ++pos) {
    const char c = text[pos];
    if (c == '.') {
      if (in_frac) throw std::invalid_argument("malformed seconds value");
      in_frac = true;
      continue;
    }
    if (c < '0' || c > '9') {
      throw std::invalid_argument("malformed seconds value: " +
                                  std::string(text));
    }
    seen_digit = true;
    if (in_frac) {
      if (frac_digits < 9) {
        frac = frac * 10 + (c - '0');
        ++frac_digits;
      }
    } else {
      whole = whole * 10 + (c - '0');
    }
  }
  if (!seen_digit) throw std::invalid_argument("malformed seconds value");
  for (; frac_digits < 9; ++frac_digits) frac *= 10;
  const std::int64_t ns = whole * 1'000'000'000 + frac;
  return SimDuration(negative ? -ns : ns);
}

}  // namespace rqsim
