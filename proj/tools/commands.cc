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

#include "commands.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "rqsim/errors.h"
#include "rqsim/trace_io.h"
#include "rqsim/workload.h"

#ifndef RQSIM_DEFAULT_PRESET_DIR
#define RQSIM_DEFAULT_PRESET_DIR "configs/presets"
#endif

namespace rqsim::cli {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path resolve_preset_dir(const std::optional<std::string>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("RQSIM_PRESET_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return RQSIM_DEFAULT_PRESET_DIR;
}

void RunConfig::validate() const {
  if (policies.empty()) throw ConfigError("no policies given");
  if (!trace_path && rates.empty()) throw ConfigError("no rates given");
  for (double r : rates) {
    if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("rates must be positive");
  }
  if (seeds == 0) throw ConfigError("seeds must be at least 1");
  if (num_relqueries == 0) throw ConfigError("num_relqueries must be positive");
  if (size_min == 0 || size_min > size_max) {
    throw ConfigError("size range must satisfy 1 <= size_min <= size_max");
  }
  if (sample_size == 0) throw ConfigError("sample_size must be positive");
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be non-negative");
  if (block_size == 0) throw ConfigError("block_size must be positive");
  if (trace_path && !fs::exists(*trace_path)) {
    throw ConfigError("trace file " + *trace_path + " does not exist");
  }
  constraints.validate();
}

void apply_config_json(RunConfig& c, const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw SchemaError("config must be a JSON object");
  static const std::vector<std::string> kKeys = {
      "preset",      "trace",        "num_relqueries", "size_min",  "size_max",
      "policies",    "rates",        "seeds",          "seed_base", "constraints",
      "world_model", "policy_model", "sample_size",    "tau",       "noise_sigma",
      "block_size",  "cache_capacity_blocks", "baseline", "out", "write_decisions", "jobs"};
  for (const auto& [key, value] : doc.items()) {
    if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) {
      throw SchemaError("unknown config key '" + key + "'");
    }
  }
  try {
    if (doc.contains("preset")) c.preset = doc["preset"].get<std::string>();
    if (doc.contains("trace")) c.trace_path = doc["trace"].get<std::string>();
    if (doc.contains("num_relqueries")) c.num_relqueries = doc["num_relqueries"].get<std::size_t>();
    if (doc.contains("size_min")) c.size_min = doc["size_min"].get<std::uint32_t>();
    if (doc.contains("size_max")) c.size_max = doc["size_max"].get<std::uint32_t>();
    if (doc.contains("policies")) {
      c.policies.clear();
      for (const auto& p : doc["policies"]) c.policies.push_back(parse_policy(p.get<std::string>()));
    }
    if (doc.contains("rates")) c.rates = doc["rates"].get<std::vector<double>>();
    if (doc.contains("seeds")) c.seeds = doc["seeds"].get<std::uint32_t>();
    if (doc.contains("seed_base")) c.seed_base = doc["seed_base"].get<std::uint64_t>();
    if (doc.contains("constraints")) {
      const auto& k = doc["constraints"];
      c.constraints.cap = k.value("cap", c.constraints.cap);
      c.constraints.max_num_seqs = k.value("max_num_seqs", c.constraints.max_num_seqs);
      c.constraints.max_num_batched_tokens =
          k.value("max_num_batched_tokens", c.constraints.max_num_batched_tokens);
    }
    if (doc.contains("world_model")) c.world_model = doc["world_model"].get<std::string>();
    if (doc.contains("policy_model")) c.policy_model = doc["policy_model"].get<std::string>();
    if (doc.contains("sample_size")) c.sample_size = doc["sample_size"].get<std::size_t>();
    if (doc.contains("tau")) c.tau = doc["tau"].is_null() ? 0.0 : doc["tau"].get<double>();
    if (doc.contains("noise_sigma")) c.noise_sigma = doc["noise_sigma"].get<double>();
    if (doc.contains("block_size")) c.block_size = doc["block_size"].get<std::uint32_t>();
    if (doc.contains("cache_capacity_blocks")) {
      c.cache_capacity_blocks = doc["cache_capacity_blocks"].get<std::size_t>();
    }
    if (doc.contains("baseline")) c.baseline = parse_policy(doc["baseline"].get<std::string>());
    if (doc.contains("out")) c.out = doc["out"].get<std::string>();
    if (doc.contains("write_decisions")) c.write_decisions = doc["write_decisions"].get<bool>();
    if (doc.contains("jobs")) c.jobs = doc["jobs"].get<std::uint32_t>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("config has a value of the wrong type: ") + e.what());
  }
}

std::string config_to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["preset"] = c.preset;
  if (c.trace_path) j["trace"] = *c.trace_path;
  j["num_relqueries"] = c.num_relqueries;
  j["size_min"] = c.size_min;
  j["size_max"] = c.size_max;
  j["policies"] = json::array();
  for (auto p : c.policies) j["policies"].push_back(std::string(policy_name(p)));
  j["rates"] = c.rates;
  j["seeds"] = c.seeds;
  j["seed_base"] = c.seed_base;
  j["constraints"] = {{"cap", c.constraints.cap},
                      {"max_num_seqs", c.constraints.max_num_seqs},
                      {"max_num_batched_tokens", c.constraints.max_num_batched_tokens}};
  j["world_model"] = c.world_model;
  j["policy_model"] = c.policy_model;
  j["sample_size"] = c.sample_size;
  j["tau"] = c.tau > 0.0 ? json(c.tau) : json(nullptr);
  j["noise_sigma"] = c.noise_sigma;
  j["block_size"] = c.block_size;
  j["cache_capacity_blocks"] = c.cache_capacity_blocks;
  j["baseline"] = std::string(policy_name(c.baseline));
  j["out"] = c.out;
  j["write_decisions"] = c.write_decisions;
  return j.dump(2) + "\n";
}

LinearCostModel resolve_model(const std::string& spec, const fs::path& preset_dir) {
  if (spec.ends_with(".json") || fs::is_regular_file(spec)) return load_model_file(spec);
  return find_model_preset(preset_dir, spec);
}

std::string cell_name(const Cell& cell) {
  return std::string(policy_name(cell.policy)) + "_r" + format_number(cell.rate) + "_s" +
         std::to_string(cell.seed);
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Writes through a temporary file so an interrupted run leaves no partial file.
template <typename Fn>
void write_atomically(const fs::path& path, Fn&& body) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    body(out);
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

struct TraceSlot {
  ArrivalTrace trace;
  std::uint64_t fingerprint = 0;
};

std::optional<RunSummary> load_finished(const fs::path& dir, std::uint64_t fingerprint) {
  const auto info = dir / "run.json";
  const auto rows = dir / "relqueries.csv";
  if (!fs::exists(info) || !fs::exists(rows)) return std::nullopt;
  try {
    RunSummary s = parse_run_info_json(read_file(info));
    if (s.trace_fingerprint != fingerprint) return std::nullopt;
    std::ifstream in(rows);
    s.rows = read_relquery_csv(in);
    return s;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

GridResult run_grid(const RunConfig& config, const fs::path& preset_dir, std::ostream& log) {
  config.validate();
  const LinearCostModel world = resolve_model(config.world_model, preset_dir);
  const LinearCostModel belief =
      config.policy_model == "world" ? world : resolve_model(config.policy_model, preset_dir);

  // One trace per (rate, seed), shared by every policy.
  std::vector<std::pair<double, std::uint64_t>> keys;
  std::vector<TraceSlot> traces;
  if (config.trace_path) {
    TraceSlot slot;
    slot.trace = read_trace_file(*config.trace_path);
    slot.fingerprint = trace_fingerprint(slot.trace);
    keys.emplace_back(slot.trace.rate, slot.trace.seed);
    traces.push_back(std::move(slot));
  } else {
    const TablePreset preset = find_table_preset(preset_dir, config.preset);
    for (double rate : config.rates) {
      for (std::uint32_t i = 0; i < config.seeds; ++i) {
        TraceConfig tc;
        tc.preset = preset;
        tc.num_relqueries = config.num_relqueries;
        tc.size_min = config.size_min;
        tc.size_max = config.size_max;
        tc.rate = rate;
        tc.seed = config.seed_base + i;
        TraceSlot slot;
        slot.trace = generate_trace(tc);
        slot.fingerprint = trace_fingerprint(slot.trace);
        keys.emplace_back(rate, tc.seed);
        traces.push_back(std::move(slot));
      }
    }
  }

  struct Task {
    Cell cell;
    std::size_t trace = 0;
  };
  std::vector<Task> tasks;
  for (std::size_t t = 0; t < traces.size(); ++t) {
    for (Policy p : config.policies) tasks.push_back({{p, keys[t].first, keys[t].second}, t});
  }

  const fs::path out_dir = config.out;
  fs::create_directories(out_dir / "runs");
  write_atomically(out_dir / "config.json", [&](std::ostream& o) { o << config_to_json(config); });

  GridResult result;
  result.runs.resize(tasks.size());
  std::vector<bool> resumed(tasks.size(), false);
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::optional<std::string> failure;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      {
        std::lock_guard lock(mu);
        if (failure) return;
      }
      const Task& task = tasks[i];
      const TraceSlot& slot = traces[task.trace];
      const std::string name = cell_name(task.cell);
      const fs::path dir = out_dir / "runs" / name;
      try {
        if (config.resume) {
          if (auto done = load_finished(dir, slot.fingerprint)) {
            result.runs[i] = std::move(*done);
            resumed[i] = true;
            continue;
          }
        }
        EngineConfig ec;
        ec.policy = task.cell.policy;
        ec.constraints = config.constraints;
        ec.world = world;
        ec.belief = belief;
        ec.dpu.sample_size = config.sample_size;
        ec.dpu.tau = config.tau > 0.0 ? config.tau : std::numeric_limits<double>::infinity();
        ec.block_size = config.block_size;
        ec.cache_capacity_blocks = config.cache_capacity_blocks;
        ec.noise_sigma = config.noise_sigma;
        ec.seed = task.cell.seed;
        ec.record_decisions = config.write_decisions;
        Engine engine(slot.trace, ec);
        RunResult run = engine.finish();
        run.trace_fingerprint = slot.fingerprint;
        RunSummary summary = summarize_run(run);

        fs::create_directories(dir);
        write_atomically(dir / "relqueries.csv",
                         [&](std::ostream& o) { write_relquery_csv(o, summary.rows); });
        if (config.write_decisions) {
          write_atomically(dir / "decisions.csv",
                           [&](std::ostream& o) { write_decisions_csv(o, run.decisions); });
        }
        write_atomically(dir / "run.json", [&](std::ostream& o) { o << run_info_json(summary); });
        result.runs[i] = std::move(summary);
        std::lock_guard lock(mu);
        log << "finished " << name << '\n';
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        if (!failure) failure = "run " + name + " failed: " + e.what();
        return;
      }
    }
  };

  std::size_t jobs = config.jobs != 0 ? config.jobs : std::thread::hardware_concurrency();
  jobs = std::max<std::size_t>(1, std::min(jobs, tasks.size()));
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) throw SimulationAbort(*failure);

  for (bool r : resumed) result.resumed += r ? 1 : 0;
  result.summary = summarize(result.runs, config.baseline);
  write_atomically(out_dir / "summary.csv",
                   [&](std::ostream& o) { write_summary_csv(o, result.summary); });
  write_atomically(out_dir / "summary_long.csv",
                   [&](std::ostream& o) { write_summary_long_csv(o, result.summary); });
  write_atomically(out_dir / "overhead.csv",
                   [&](std::ostream& o) { write_overhead_csv(o, result.runs); });
  return result;
}

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int report(std::ostream& err, int code, const std::string& what) {
  err << "rqsim: " << what << '\n';
  return code;
}

}  // namespace

int run_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulator for serving relational LLM queries"};
  app.require_subcommand(1);
  std::optional<std::string> preset_dir;
  app.add_option("--preset-dir", preset_dir, "Directory holding tables/ and models/ presets");

  // gen-trace
  auto* gen = app.add_subcommand("gen-trace", "Generate a Poisson arrival trace");
  std::string gen_preset = "amazon";
  double gen_rate = 1.0;
  std::uint64_t gen_seed = 0;
  std::size_t gen_count = 100;
  std::uint32_t gen_min = 1;
  std::uint32_t gen_max = 100;
  std::string gen_out;
  gen->add_option("--preset", gen_preset, "Table preset")->capture_default_str();
  gen->add_option("--rate", gen_rate, "relQueries per second")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Random seed")->capture_default_str();
  gen->add_option("--num-relqueries", gen_count)->capture_default_str();
  gen->add_option("--size-min", gen_min)->capture_default_str();
  gen->add_option("--size-max", gen_max)->capture_default_str();
  gen->add_option("-o,--out", gen_out, "Output trace file")->required();

  // run
  auto* run_cmd = app.add_subcommand("run", "Run a policy x rate x seed grid");
  std::optional<std::string> config_path, policies, rates, out_dir, preset, trace, world,
      policy_model, baseline;
  std::optional<std::uint32_t> seeds, jobs;
  std::optional<double> tau, noise;
  std::optional<std::size_t> sample_size, num_relqueries;
  bool resume = false;
  bool no_decisions = false;
  run_cmd->add_option("--config", config_path, "JSON experiment config");
  run_cmd->add_option("--policies", policies, "Comma list: fcfs,sp,relserve,relserve-pp,relserve-dp");
  run_cmd->add_option("--rates", rates, "Comma list of arrival rates");
  run_cmd->add_option("--seeds", seeds, "Number of seeds per rate");
  run_cmd->add_option("--out", out_dir, "Output directory");
  run_cmd->add_flag("--resume", resume, "Skip cells that already finished");
  run_cmd->add_option("--preset", preset, "Table preset");
  run_cmd->add_option("--trace", trace, "Use this trace instead of generating");
  run_cmd->add_option("--num-relqueries", num_relqueries);
  run_cmd->add_option("--tau", tau, "Starvation threshold (s per request); <= 0 disables");
  run_cmd->add_option("--sample-size", sample_size, "Requests sampled for the miss ratio");
  run_cmd->add_option("--noise-sigma", noise, "Multiplicative noise on batch durations");
  run_cmd->add_option("--world-model", world, "Model preset or JSON file");
  run_cmd->add_option("--policy-model", policy_model, "'world', a preset or a fitted JSON file");
  run_cmd->add_option("--baseline", baseline, "Policy used for speedups");
  run_cmd->add_option("--jobs", jobs, "Parallel runs (0 = all cores)");
  run_cmd->add_flag("--no-decisions", no_decisions, "Skip per-iteration decision logs");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Fit the linear cost model to samples");
  std::string samples_path;
  std::optional<std::string> model_out;
  fit_cmd->add_option("samples", samples_path, "CSV: kind,x,duration_s")->required();
  fit_cmd->add_option("-o,--out", model_out, "Write the fitted model as JSON");

  // gen-samples
  auto* samples_cmd = app.add_subcommand("gen-samples", "Synthesize calibration samples");
  std::string samples_model = "opt-13b";
  std::size_t per_kind = 200;
  double samples_noise = 0.0;
  std::uint64_t samples_seed = 0;
  std::string samples_out;
  samples_cmd->add_option("--model", samples_model, "Model preset or JSON file")
      ->capture_default_str();
  samples_cmd->add_option("--per-kind", per_kind)->capture_default_str();
  samples_cmd->add_option("--noise-sigma", samples_noise)->capture_default_str();
  samples_cmd->add_option("--seed", samples_seed)->capture_default_str();
  samples_cmd->add_option("-o,--out", samples_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return report(err, kExitValidation, e.what());
  }

  try {
    const fs::path presets = resolve_preset_dir(preset_dir);
    if (*gen) {
      TraceConfig tc;
      tc.preset = find_table_preset(presets, gen_preset);
      tc.rate = gen_rate;
      tc.seed = gen_seed;
      tc.num_relqueries = gen_count;
      tc.size_min = gen_min;
      tc.size_max = gen_max;
      const ArrivalTrace t = generate_trace(tc);
      write_trace_file(gen_out, t);
      out << t.entries.size() << " relQueries, " << t.total_requests() << " requests, preset "
          << t.preset << ", rate " << format_number(t.rate) << ", seed " << t.seed << " -> "
          << gen_out << '\n';
    } else if (*run_cmd) {
      RunConfig c;
      if (config_path) apply_config_json(c, read_file(*config_path));
      if (policies) {
        c.policies.clear();
        for (const auto& p : split_list(*policies)) c.policies.push_back(parse_policy(p));
      }
      if (rates) {
        c.rates.clear();
        for (const auto& r : split_list(*rates)) {
          try {
            c.rates.push_back(std::stod(r));
          } catch (const std::exception&) {
            throw ConfigError("bad rate '" + r + "'");
          }
        }
      }
      if (seeds) c.seeds = *seeds;
      if (out_dir) c.out = *out_dir;
      if (preset) c.preset = *preset;
      if (trace) c.trace_path = *trace;
      if (num_relqueries) c.num_relqueries = *num_relqueries;
      if (tau) c.tau = *tau;
      if (sample_size) c.sample_size = *sample_size;
      if (noise) c.noise_sigma = *noise;
      if (world) c.world_model = *world;
      if (policy_model) c.policy_model = *policy_model;
      if (baseline) c.baseline = parse_policy(*baseline);
      if (jobs) c.jobs = *jobs;
      if (no_decisions) c.write_decisions = false;
      c.resume = resume;
      std::ostringstream log;
      const GridResult g = run_grid(c, presets, log);
      out << g.runs.size() << " runs (" << g.resumed << " resumed) -> " << c.out << '\n';
      write_summary_csv(out, g.summary);
    } else if (*fit_cmd) {
      const FitResult r = fit(read_samples_file(samples_path));
      for (const auto& w : r.warnings) err << "warning: " << w << '\n';
      out << model_to_json(r.model);
      if (model_out) save_model_file(*model_out, r.model);
    } else if (*samples_cmd) {
      const LinearCostModel truth = resolve_model(samples_model, presets);
      const auto samples = synthesize_samples(truth, per_kind, samples_noise, samples_seed);
      std::ofstream o(samples_out, std::ios::trunc);
      if (!o) throw std::runtime_error("cannot write " + samples_out);
      write_samples(o, samples);
      out << samples.size() << " samples -> " << samples_out << '\n';
    }
  } catch (const ConfigError& e) {
    return report(err, kExitValidation, e.what());
  } catch (const SchemaError& e) {
    return report(err, kExitValidation, e.what());
  } catch (const FitError& e) {
    return report(err, kExitValidation, e.what());
  } catch (const std::exception& e) {
    return report(err, kExitRuntime, e.what());
  }
  return kExitOk;
}

}  // namespace rqsim::cli
