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

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace rqsim {

// Simulated time is kept in integer nanoseconds so that latency periods
// computed from recorded timestamps add up without rounding drift.
using SimDuration = std::chrono::nanoseconds;

struct SimClock {
  using rep = SimDuration::rep;
  using period = SimDuration::period;
  using duration = SimDuration;
  using time_point = std::chrono::time_point<SimClock>;
  static constexpr bool is_steady = true;
};

using SimTime = SimClock::time_point;

inline constexpr SimTime kSimEpoch{};

// Rounds to the nearest nanosecond. Negative inputs clamp to zero.
SimDuration from_seconds(double seconds);

inline double to_seconds(SimDuration d) {
  return static_cast<double>(d.count()) * 1e-9;
}

inline double to_seconds(SimTime t) { return to_seconds(t - kSimEpoch); }

inline SimTime time_at(double seconds) {
  return kSimEpoch + from_seconds(seconds);
}

// Exact decimal rendering "S.NNNNNNNNN" of an integer nanosecond count.
std::string format_seconds(SimDuration d);
inline std::string format_seconds(SimTime t) {
  return format_seconds(t - kSimEpoch);
}

// Inverse of format_seconds; also accepts fewer fractional digits and a
// leading '-'. Throws std::invalid_argument on malformed input.
SimDuration parse_seconds(std::string_view text);

}  // namespace rqsim
