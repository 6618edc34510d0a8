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
#include <string_view>
#include <vector>

namespace rqsim {

// Linear batch-duration predictors. Prefill cost is driven by the number of
// *uncached* input tokens, decode cost by the number of requests.
struct LinearCostModel {
  double alpha_p = 0.0;  // s / uncached token
  double beta_p = 0.0;   // s
  double alpha_d = 0.0;  // s / request
  double beta_d = 0.0;   // s

  // Throws ConfigError if any coefficient is negative or not finite.
  void validate() const;
  friend bool operator==(const LinearCostModel&, const LinearCostModel&) = default;
};

// Strong type for the prefill predictor input, so a total token count cannot
// be passed by accident.
struct UncachedTokens {
  std::uint64_t value = 0;
};

double predict_prefill(const LinearCostModel& model, UncachedTokens uncached);
double predict_decode(const LinearCostModel& model, std::uint64_t num_requests);

enum class BatchKind { kPrefill, kDecode };

struct CalibrationSample {
  BatchKind kind = BatchKind::kPrefill;
  double x = 0.0;         // uncached tokens (prefill) or requests (decode)
  double duration = 0.0;  // seconds
};

struct FitResult {
  LinearCostModel model;
  // Set when a fitted coefficient came out negative and was clamped to 0.
  bool clamped = false;
  std::vector<std::string> warnings;
};

// Ordinary least squares per batch kind. Needs at least two distinct x values
// for each kind; throws FitError otherwise.
FitResult fit(const std::vector<CalibrationSample>& samples);

// Calibration files hold one `kind,x,duration_s` record per line. A header
// line and '#' comments are allowed.
std::vector<CalibrationSample> read_samples(std::istream& in);
std::vector<CalibrationSample> read_samples_file(const std::filesystem::path& path);
void write_samples(std::ostream& out, const std::vector<CalibrationSample>& samples);

// Model files: {"alpha_p":..,"beta_p":..,"alpha_d":..,"beta_d":..}.
std::string model_to_json(const LinearCostModel& model);
LinearCostModel model_from_json(std::string_view text);
LinearCostModel load_model_file(const std::filesystem::path& path);
void save_model_file(const std::filesystem::path& path, const LinearCostModel& model);
// Looks up "<dir>/models/<name>.json".
LinearCostModel find_model_preset(const std::filesystem::path& preset_dir,
                                  std::string_view name);

// Draws `per_kind` samples of each kind from `truth` with multiplicative
// Gaussian noise of relative std-dev `noise_sigma`. x values are spread
// uniformly over [1, max_tokens] and [1, max_requests].
std::vector<CalibrationSample> synthesize_samples(const LinearCostModel& truth,
                                                  std::size_t per_kind,
                                                  double noise_sigma,
                                                  std::uint64_t seed,
                                                  std::uint32_t max_tokens = 4096,
                                                  std::uint32_t max_requests = 256);

}  // namespace rqsim
