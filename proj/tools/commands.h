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

#include "rqsim/batch.h"
#include "rqsim/cost_model.h"
#include "rqsim/engine.h"
#include "rqsim/metrics.h"

namespace rqsim::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

// Preset directory: --preset-dir, else $RQSIM_PRESET_DIR, else the source tree.
std::filesystem::path resolve_preset_dir(const std::optional<std::string>& flag);

// Experiment grid of the `run` command. Loaded from a JSON file and then
// overridden by flags.
struct RunConfig {
  std::string preset = "amazon";
  std::optional<std::string> trace_path;  // replaces generation; rates/seeds unused
  std::size_t num_relqueries = 100;
  std::uint32_t size_min = 1;
  std::uint32_t size_max = 100;
  std::vector<Policy> policies = {Policy::kFcfs, Policy::kStaticPriority, Policy::kRelServe};
  std::vector<double> rates = {0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::uint32_t seeds = 1;
  std::uint64_t seed_base = 0;
  SchedulerConstraints constraints;
  std::string world_model = "opt-13b";  // preset name or JSON file
  // "world" (scheduler knows the truth), a preset name, or a fitted JSON file.
  std::string policy_model = "world";
  std::size_t sample_size = 8;
  double tau = 0.0;  // 0 or negative disables the starvation override
  double noise_sigma = 0.0;
  std::uint32_t block_size = 16;
  std::size_t cache_capacity_blocks = 4096;
  Policy baseline = Policy::kFcfs;
  std::string out = "results";
  bool resume = false;
  bool write_decisions = true;
  std::uint32_t jobs = 0;  // 0 = hardware concurrency

  void validate() const;
};

// Applies the keys present in a JSON document on top of `config`.
void apply_config_json(RunConfig& config, const std::string& json_text);
std::string config_to_json(const RunConfig& config);

// Resolves a model given as a preset name or a JSON file path.
LinearCostModel resolve_model(const std::string& spec, const std::filesystem::path& preset_dir);

// One (policy, rate, seed) cell of the grid.
struct Cell {
  Policy policy = Policy::kFcfs;
  double rate = 0.0;
  std::uint64_t seed = 0;
};
std::string cell_name(const Cell& cell);

struct GridResult {
  std::vector<RunSummary> runs;
  std::vector<SummaryRow> summary;
  std::size_t resumed = 0;
};

// Runs the grid, writing per-run files and the combined tables under
// config.out. Throws on the first failing cell with its name in the message.
GridResult run_grid(const RunConfig& config, const std::filesystem::path& preset_dir,
                    std::ostream& log);

// Entry point shared by the binary and the tests. Returns the exit code.
int run_main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace rqsim::cli
