//
// Copyright 2026 The fedalign Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// fedalign command-line entry point.
//
//   fedalign run <config> [--seed N] [--preset name] [--no-attack] [--jobs N]
//                [--out DIR]
//   fedalign validate <config>
//   fedalign resolve <config>     print the fully merged config
//
// Exit status: 0 ok, 1 configuration error, 2 runtime error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fedalign/errors.hpp"
#include "fedalign/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning distribution-alignment experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> preset;
  std::optional<std::string> out_dir;
  bool no_attack = false;
  int jobs = 1;

  auto* run = app.add_subcommand("run", "Run an experiment");
  run->add_option("config", config_path, "Experiment config (JSON)")
      ->required();
  run->add_option("--seed", seed, "Override the master seed");
  run->add_option("--preset", preset, "Base preset (setting1..setting4)");
  run->add_flag("--no-attack", no_attack, "Ignore the attack block");
  run->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  run->add_option("--out", out_dir, "Output directory");

  auto* validate = app.add_subcommand("validate", "Check a config");
  validate->add_option("config", config_path, "Experiment config (JSON)")
      ->required();

  auto* resolve = app.add_subcommand("resolve", "Print the merged config");
  resolve->add_option("config", config_path, "Experiment config (JSON)")
      ->required();
  resolve->add_option("--preset", preset, "Base preset (setting1..setting4)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  using namespace fedalign;
  Json doc;
  try {
    doc = read_json_file(config_path);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }

  if (validate->parsed()) {
    std::vector<std::string> errors;
    try {
      errors = validate_config(resolve_config(doc));
    } catch (const ConfigError& e) {
      errors.emplace_back(e.what());
    }
    for (const auto& e : errors) std::cout << e << "\n";
    if (!errors.empty()) {
      std::cout << errors.size() << " violation(s)\n";
      return kExitConfig;
    }
    std::cout << "ok\n";
    return kExitOk;
  }

  if (resolve->parsed()) {
    try {
      std::cout << resolve_config(doc, preset).dump(2) << "\n";
    } catch (const ConfigError& e) {
      std::cerr << e.what() << "\n";
      return kExitConfig;
    }
    return kExitOk;
  }

  if (seed) doc["seed"] = *seed;
  if (out_dir) doc["output_dir"] = *out_dir;
  // The attack block is ignored, including its round-range checks.
  if (no_attack && doc.is_object()) doc["attack"]["enabled"] = false;
  ExperimentConfig cfg;
  try {
    cfg = parse_config(doc, preset);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  }
  if (cfg.resolved.contains("jobs") && jobs == 1) {
    jobs = cfg.resolved["jobs"].get<int>();
  }

  try {
    RunOptions options;
    options.no_attack = no_attack;
    options.jobs = jobs;
    const ExperimentResult result = run_experiment(cfg, options);
    std::printf("final accuracy %s\n",
                format_double(result.accuracy.points().back().second).c_str());
    for (const auto& s : result.inferences) {
      std::printf("inference round %d: inferred-to-true %s (original-to-true %s)\n",
                  s.round, format_double(s.inferred_to_true).c_str(),
                  format_double(result.original_to_true_mean).c_str());
    }
    if (result.backdoor_window) {
      std::printf("backdoor success rounds %d-%d: mean %s std %s\n",
                  result.backdoor_window->first_round,
                  result.backdoor_window->last_round,
                  format_double(result.backdoor_window->mean).c_str(),
                  format_double(result.backdoor_window->std).c_str());
    }
    std::printf("results written to %s\n", cfg.output_dir.c_str());
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
