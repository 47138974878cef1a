/*
 * Copyright 2026 The FuseLocate Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line front end for the localization experiments.

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "CLI11.hpp"
#include "fuselocate/common.hpp"
#include "fuselocate/experiment.hpp"

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string out;
  std::vector<std::string> overrides;
  std::string method = "all";
};

fuselocate::ExperimentConfig load(const Options& options) {
  std::vector<std::string> overrides = options.overrides;
  if (options.seed) overrides.push_back(fmt::format("master_seed={}", *options.seed));
  std::optional<std::filesystem::path> path;
  if (!options.config_path.empty()) path = options.config_path;
  return fuselocate::load_config(path, overrides);
}

void print_warnings(const fuselocate::EvaluateSummary& summary) {
  for (const auto& w : summary.warnings) fmt::print(stderr, "warning: {}\n", w);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wi-Fi / LiDAR / IMU fusion localization experiments"};
  app.require_subcommand(1);
  Options options;
  app.add_option("--config", options.config_path, "JSON experiment configuration");
  app.add_option("--seed", options.seed, "Master seed (overrides master_seed)");
  app.add_option("--jobs", options.jobs, "Parallel runs")->check(CLI::PositiveNumber);
  app.add_option("--out", options.out, "Output directory");
  app.add_option("--set", options.overrides, "Override a config field, KEY=VALUE");

  auto* generate = app.add_subcommand("generate", "Simulate worlds and sensor logs");
  auto* fingerprint = app.add_subcommand("fingerprint", "Fingerprint database and model");
  fingerprint->require_subcommand(1);
  auto* fp_collect = fingerprint->add_subcommand("collect", "Survey the fingerprint database");
  auto* fp_train = fingerprint->add_subcommand("train", "Train the regression network");
  auto* fp_predict = fingerprint->add_subcommand("predict", "Predict Wi-Fi fixes per run");
  auto* fp_eval = fingerprint->add_subcommand("eval", "Score DNN and kNN on the held-out split");
  auto* run = app.add_subcommand("run", "Run a localization method");
  run->add_option("method", options.method, "WiFi, LidarImu, EKF or all");
  auto* evaluate = app.add_subcommand("evaluate", "Score runs and render reports");
  auto* all = app.add_subcommand("all", "Run every stage");
  for (auto* sub : {generate, fingerprint, fp_collect, fp_train, fp_predict, fp_eval, run, evaluate,
                    all}) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const fuselocate::ExperimentConfig config = load(options);
    const std::filesystem::path out = fuselocate::resolve_output_dir(
        options.out.empty() ? std::nullopt : std::optional<std::string>(options.out), config);
    const int jobs = options.jobs;
    if (generate->parsed()) {
      fuselocate::cmd_generate(config, out, jobs);
    } else if (fp_collect->parsed()) {
      fuselocate::cmd_fingerprint_collect(config, out, jobs);
    } else if (fp_train->parsed()) {
      fuselocate::cmd_fingerprint_train(config, out, jobs);
    } else if (fp_predict->parsed()) {
      fuselocate::cmd_fingerprint_predict(config, out, jobs);
    } else if (fp_eval->parsed()) {
      fuselocate::cmd_fingerprint_eval(config, out, jobs);
    } else if (run->parsed()) {
      if (options.method == "all") {
        for (auto m : config.methods) fuselocate::cmd_run(config, out, m, jobs);
      } else {
        fuselocate::Method method;
        try {
          method = fuselocate::parse_method(options.method);
        } catch (const fuselocate::Error& e) {
          throw fuselocate::ConfigError(e.what());
        }
        fuselocate::cmd_run(config, out, method, jobs);
      }
    } else if (evaluate->parsed()) {
      print_warnings(fuselocate::cmd_evaluate(config, out));
    } else if (all->parsed()) {
      print_warnings(fuselocate::cmd_all(config, out, jobs));
    }
    return 0;
  } catch (const fuselocate::Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return fuselocate::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
}
