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

#include <stdexcept>
#include <string>

namespace rqsim {

// Invalid configuration values (rates, ranges, constraint sets).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Template/table mismatch or malformed structured input.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Calibration samples cannot determine a line.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A single request can never fit the scheduler constraints.
class InfeasibleRequestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The simulation cannot make progress (iteration guard, deadlock).
class SimulationAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A timestamp ledger is missing one of its four timestamps.
class IncompleteLedgerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Runs compared in one summary were produced from different traces.
class MismatchedTraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rqsim
