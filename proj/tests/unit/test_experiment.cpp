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

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedalign/errors.hpp"
#include "fedalign/experiment.hpp"

using namespace fedalign;
namespace fs = std::filesystem;

namespace {

const fs::path kTmp = fs::temp_directory_path() / "fedalign_experiment_test";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const std::string& name, const std::string& body) {
  fs::create_directories(kTmp);
  const fs::path p = kTmp / name;
  std::ofstream(p) << body;
  return p;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(FEDALIGN_CLI_PATH) + " " + args + " > " +
                          (kTmp / "cli.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool mentions(const std::vector<std::string>& errors, const std::string& path) {
  for (const auto& e : errors) {
    if (e.rfind(path + ":", 0) == 0) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("presets resolve to complete valid documents") {
  const auto names = preset_names();
  CHECK(names == std::vector<std::string>{"setting1", "setting2", "setting3", "setting4"});
  for (const auto& n : names) {
    const Json doc = resolve_config(Json{{"preset", n}});
    CHECK(validate_config(doc).empty());
  }
  const ExperimentConfig s1 = parse_config(Json{{"preset", "setting1"}});
  CHECK(s1.partition.alpha == 1.0);
  CHECK_FALSE(s1.dataset.imbalance.has_value());
  const ExperimentConfig s4 = parse_config(Json{{"preset", "setting4"}});
  CHECK(s4.partition.alpha == 0.1);
  REQUIRE(s4.dataset.imbalance.has_value());
  CHECK_THROWS_AS(preset_document("setting9"), ConfigError);
}

TEST_CASE("deep merge and preset override") {
  const Json merged = deep_merge(Json{{"a", {{"b", 1}, {"c", 2}}}, {"d", 1}},
                                 Json{{"a", {{"c", 3}}}, {"d", {1, 2}}});
  CHECK(merged == Json{{"a", {{"b", 1}, {"c", 3}}}, {"d", {1, 2}}});
  const Json doc{{"preset", "setting1"}, {"partition", {{"clients", 7}}}};
  const Json r = resolve_config(doc, std::string("setting2"));
  CHECK(r["partition"]["alpha"] == 0.1);
  CHECK(r["partition"]["clients"] == 7);
}

TEST_CASE("validation lists every violation with its field path") {
  Json doc{{"preset", "setting1"},
           {"training", {{"clients_per_round", 20}}},
           {"attack", {{"poison", {{"gamma", 0.5}}}}}};
  const auto errors = validate_config(resolve_config(doc));
  CHECK(mentions(errors, "training.clients_per_round"));
  CHECK(mentions(errors, "attack.poison.gamma"));
  CHECK(errors.size() == 2);

  doc["bogus"] = 1;
  doc["partition"] = {{"alpha", -1.0}};
  const auto more = validate_config(resolve_config(doc));
  CHECK(mentions(more, "bogus"));
  CHECK(mentions(more, "partition.alpha"));
  CHECK(more.size() == 4);

  try {
    parse_config(doc);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    CHECK(what.find("training.clients_per_round") != std::string::npos);
    CHECK(what.find("partition.alpha") != std::string::npos);
  }
}

TEST_CASE("desk run: accuracy, inference and backdoor window") {
  ExperimentConfig cfg = parse_config(Json{{"preset", "setting1"}});
  RunOptions opt;
  opt.write_outputs = false;
  const ExperimentResult r = run_experiment(cfg, opt);
  REQUIRE(r.accuracy.size() == 30);
  CHECK(r.accuracy.at(30) > 0.85);
  REQUIRE(r.inferences.size() == 1);
  CHECK(r.inferences[0].inferred_to_true < r.original_to_true_mean);
  CHECK(r.aligned_clients.size() == 2);
  REQUIRE(r.backdoor_window.has_value());
  CHECK(r.backdoor_window->first_round == 10);
  CHECK(r.backdoor_window->last_round == 19);
  // No trigger effect before injection beyond chance.
  CHECK(r.backdoor.at(9) < 0.5);
}

TEST_CASE("no-attack run is a benign baseline") {
  ExperimentConfig cfg = parse_config(Json{{"preset", "setting2"}, {"training", {{"rounds", 12}}}});
  RunOptions opt;
  opt.write_outputs = false;
  opt.no_attack = true;
  const ExperimentResult r = run_experiment(cfg, opt);
  CHECK(r.inferences.empty());
  CHECK(r.aligned_clients.empty());
  CHECK(r.injection_client == -1);
  CHECK_FALSE(r.backdoor_window.has_value());
  CHECK(r.manifest["attack_active"] == false);

  // Same as disabling the attack in the config.
  ExperimentConfig off = parse_config(
      Json{{"preset", "setting2"}, {"training", {{"rounds", 12}}}, {"attack", {{"enabled", false}}}});
  RunOptions plain;
  plain.write_outputs = false;
  CHECK(run_experiment(off, plain).final_params == r.final_params);
}

TEST_CASE("CLI exit codes") {
  const fs::path good = write_config("good.json", R"({"preset": "setting3", "training": {"rounds": 12}})");
  const fs::path bad = write_config("bad.json",
                                    R"({"preset": "setting1", "training": {"clients_per_round": 11}})");
  const fs::path broken = write_config("broken.json", "{ not json");
  const fs::path missing_data = write_config(
      "idx.json", R"({"dataset": {"source": "idx", "train_images": "/nonexistent/a",
                     "train_labels": "/nonexistent/b", "test_images": "/nonexistent/c",
                     "test_labels": "/nonexistent/d"}})");
  CHECK(cli("validate " + good.string()) == 0);
  CHECK(cli("validate " + bad.string()) == 1);
  CHECK(slurp(kTmp / "cli.log").find("training.clients_per_round") != std::string::npos);
  CHECK(cli("validate " + broken.string()) == 1);
  CHECK(cli("validate " + (kTmp / "absent.json").string()) == 2);
  CHECK(cli("run " + bad.string() + " --out " + (kTmp / "bad_out").string()) == 1);
  CHECK_FALSE(fs::exists(kTmp / "bad_out"));
  CHECK(cli("run " + missing_data.string() + " --out " + (kTmp / "idx_out").string()) == 2);
  CHECK(cli("run " + good.string() + " --out " + (kTmp / "good_out").string()) == 0);
  CHECK(fs::exists(kTmp / "good_out" / "accuracy.csv"));
  CHECK(fs::exists(kTmp / "good_out" / "manifest.json"));
  CHECK(cli("frobnicate") == 1);
}

TEST_CASE("same seed twice gives byte-identical files") {
  const fs::path cfg = write_config(
      "det.json", R"({"preset": "setting4", "training": {"rounds": 12}, "attack": {"injection_round": 3}})");
  const fs::path out = kTmp / "det_out";
  const std::vector<std::string> files{"accuracy.csv", "backdoor_success.csv", "manifest.json"};
  REQUIRE(cli("run " + cfg.string() + " --seed 7 --out " + out.string()) == 0);
  std::vector<std::string> first;
  for (const auto& f : files) first.push_back(slurp(out / f));
  REQUIRE(cli("run " + cfg.string() + " --seed 7 --jobs 3 --out " + out.string()) == 0);
  for (std::size_t i = 0; i < files.size(); ++i) {
    CHECK(!first[i].empty());
    CHECK(slurp(out / files[i]) == first[i]);
  }
  const Json manifest = Json::parse(first[2]);
  CHECK(manifest["seed"] == 7);
  CHECK(manifest["config"]["partition"]["alpha"] == 0.1);

  REQUIRE(cli("run " + cfg.string() + " --seed 8 --out " + out.string()) == 0);
  CHECK(slurp(out / "accuracy.csv") != first[0]);
  fs::remove_all(kTmp);
}
