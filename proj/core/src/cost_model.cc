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

#include "rqsim/cost_model.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "rqsim/errors.h"

namespace rqsim {

namespace {

struct Line {
  double slope = 0.0;
  double intercept = 0.0;
};

// Two-pass centred formulas keep noiseless fits exact to ~1e-15.
Line ols(const std::vector<double>& xs, const std::vector<double>& ys,
         std::string_view kind) {
  std::set<double> distinct(xs.begin(), xs.end());
  if (distinct.size() < 2) {
    throw FitError(std::string(kind) +
                   " samples need at least two distinct x values");
  }
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= xs.size();
  my /= ys.size();
  long double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const long double dx = xs[i] - mx;
    sxx += dx * dx;
    sxy += dx * (ys[i] - my);
  }
  const long double slope = sxy / sxx;
  return {static_cast<double>(slope), static_cast<double>(my - slope * mx)};
}

const char* kind_name(BatchKind kind) {
  return kind == BatchKind::kPrefill ? "prefill" : "decode";
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void LinearCostModel::validate() const {
  for (double v : {alpha_p, beta_p, alpha_d, beta_d}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ConfigError("cost model coefficients must be finite and >= 0");
    }
  }
}

double predict_prefill(const LinearCostModel& model, UncachedTokens uncached) {
  return model.alpha_p * static_cast<double>(uncached.value) + model.beta_p;
}

double predict_decode(const LinearCostModel& model, std::uint64_t num_requests) {
  return model.alpha_d * static_cast<double>(num_requests) + model.beta_d;
}

FitResult fit(const std::vector<CalibrationSample>& samples) {
  std::vector<double> px, py, dx, dy;
  for (const auto& s : samples) {
    if (!(s.x >= 0.0) || !(s.duration >= 0.0)) {
      throw FitError("calibration samples must have x >= 0 and duration >= 0");
    }
    if (s.kind == BatchKind::kPrefill) {
      px.push_back(s.x);
      py.push_back(s.duration);
    } else {
      dx.push_back(s.x);
      dy.push_back(s.duration);
    }
  }
  const Line prefill = ols(px, py, "prefill");
  const Line decode = ols(dx, dy, "decode");

  FitResult result;
  auto take = [&](double v, const char* name) {
    if (v < 0.0) {
      result.clamped = true;
      result.warnings.push_back(std::string(name) + " fitted negative (" +
                                std::to_string(v) + "), clamped to 0");
      return 0.0;
    }
    return v;
  };
  result.model.alpha_p = take(prefill.slope, "alpha_p");
  result.model.beta_p = take(prefill.intercept, "beta_p");
  result.model.alpha_d = take(decode.slope, "alpha_d");
  result.model.beta_d = take(decode.intercept, "beta_d");
  return result;
}

std::vector<CalibrationSample> read_samples(std::istream& in) {
  std::vector<CalibrationSample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string kind, x, duration;
    if (!std::getline(ss, kind, ',') || !std::getline(ss, x, ',') ||
        !std::getline(ss, duration)) {
      throw SchemaError("calibration line " + std::to_string(line_no) +
                        ": expected kind,x,duration_s");
    }
    kind = trim(kind);
    if (kind == "kind") continue;  // header
    CalibrationSample s;
    if (kind == "prefill") {
      s.kind = BatchKind::kPrefill;
    } else if (kind == "decode") {
      s.kind = BatchKind::kDecode;
    } else {
      throw SchemaError("calibration line " + std::to_string(line_no) +
                        ": unknown kind '" + kind + "'");
    }
    try {
      s.x = std::stod(trim(x));
      s.duration = std::stod(trim(duration));
    } catch (const std::exception&) {
      throw SchemaError("calibration line " + std::to_string(line_no) +
                        ": malformed number");
    }
    samples.push_back(s);
  }
  return samples;
}

std::vector<CalibrationSample> read_samples_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open calibration file " + path.string());
  return read_samples(in);
}

void write_samples(std::ostream& out, const std::vector<CalibrationSample>& samples) {
  out << "kind,x,duration_s\n";
  char buf[96];
  for (const auto& s : samples) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g\n", kind_name(s.kind), s.x,
                  s.duration);
    out << buf;
  }
}

std::string model_to_json(const LinearCostModel& model) {
  nlohmann::ordered_json doc;
  doc["alpha_p"] = model.alpha_p;
  doc["beta_p"] = model.beta_p;
  doc["alpha_d"] = model.alpha_d;
  doc["beta_d"] = model.beta_d;
  return doc.dump(2) + "\n";
}

LinearCostModel model_from_json(std::string_view text) {
  LinearCostModel model;
  try {
    const auto doc = nlohmann::json::parse(text);
    model.alpha_p = doc.at("alpha_p").get<double>();
    model.beta_p = doc.at("beta_p").get<double>();
    model.alpha_d = doc.at("alpha_d").get<double>();
    model.beta_d = doc.at("beta_d").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed cost model: ") + e.what());
  }
  model.validate();
  return model;
}

LinearCostModel load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open cost model " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

void save_model_file(const std::filesystem::path& path, const LinearCostModel& model) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << model_to_json(model);
}

LinearCostModel find_model_preset(const std::filesystem::path& preset_dir,
                                  std::string_view name) {
  const auto path = preset_dir / "models" / (std::string(name) + ".json");
  if (!std::filesystem::exists(path)) {
    throw SchemaError("unknown model preset '" + std::string(name) + "'");
  }
  return load_model_file(path);
}

std::vector<CalibrationSample> synthesize_samples(const LinearCostModel& truth,
                                                  std::size_t per_kind,
                                                  double noise_sigma,
                                                  std::uint64_t seed,
                                                  std::uint32_t max_tokens,
                                                  std::uint32_t max_requests) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<std::uint32_t> tokens(1, max_tokens);
  std::uniform_int_distribution<std::uint32_t> requests(1, max_requests);
  std::vector<CalibrationSample> samples;
  samples.reserve(2 * per_kind);
  auto jitter = [&](double v) {
    return noise_sigma > 0.0 ? std::max(0.0, v * (1.0 + noise_sigma * noise(rng))) : v;
  };
  for (std::size_t i = 0; i < per_kind; ++i) {
    const auto x = tokens(rng);
    samples.push_back({BatchKind::kPrefill, static_cast<double>(x),
                       jitter(predict_prefill(truth, UncachedTokens{x}))});
  }
  for (std::size_t i = 0; i < per_kind; ++i) {
    const auto x = requests(rng);
    samples.push_back({BatchKind::kDecode, static_cast<double>(x),
                       jitter(predict_decode(truth, x))});
  }
  return samples;
}

}  // namespace rqsim
