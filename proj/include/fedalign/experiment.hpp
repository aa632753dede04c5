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

#ifndef FEDALIGN_EXPERIMENT_HPP_
#define FEDALIGN_EXPERIMENT_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fedalign/attack.hpp"
#include "fedalign/data.hpp"
#include "fedalign/defenses.hpp"
#include "fedalign/engine.hpp"
#include "fedalign/metrics.hpp"
#include "fedalign/model.hpp"

namespace fedalign {

using Json = nlohmann::json;

struct DatasetConfig {
  std::string source = "synthetic";  // "synthetic" or "idx"
  int num_classes = 5;
  // Synthetic blobs.
  std::size_t feature_dim = 16;
  std::size_t train_per_class = 400;
  std::size_t test_per_class = 200;
  double separation = 1.0;
  double noise_std = 1.0;
  // IDX files.
  std::string train_images, train_labels, test_images, test_labels;
  // Per-class keep fraction range applied to the training population.
  std::optional<std::pair<double, double>> imbalance;
  // Share of the training population held out as the attacker's public pool.
  double public_fraction = 0.01;
};

struct ModelConfig {
  std::vector<std::size_t> hidden{32};
  Activation activation = Activation::kTanh;
};

struct AttackConfig {
  bool enabled = false;
  // Share of clients training on auxiliary data after inference; ignored
  // when aligned_clients is given.
  double alignment_fraction = 0.0;
  std::vector<int> aligned_clients;
  // -1: the first aligned client.
  int inference_client = -1;
  std::vector<int> inference_rounds;
  // 0 disables the backdoor.
  int injection_round = 0;
  // -1: drawn from the seed.
  int injection_client = -1;
  std::size_t trigger_size = 4;
  std::optional<double> trigger_value;  // default: largest feature value
  int target_label = 0;
  PoisonConfig poison;
  EvolutionConfig evolution;
  AugmentationPolicy augmentation;
  std::size_t aux_size = 0;
};

struct ExperimentConfig {
  std::string preset;
  std::uint64_t seed = 1;
  std::string output_dir = "results";
  DatasetConfig dataset;
  ModelConfig model;
  PartitionSpec partition;
  int rounds = 30;
  RoundConfig round;
  DefenseConfig defense;
  AttackConfig attack;
  // Fully merged document the fields above were read from.
  Json resolved;
};

// Names of the built-in presets.
std::vector<std::string> preset_names();
// Complete document of a built-in preset. Throws ConfigError if unknown.
Json preset_document(const std::string& name);

// Objects merge key by key; anything else in `patch` replaces `base`.
Json deep_merge(Json base, const Json& patch);

// Expands "preset" (or `preset_override`) and merges the document over it.
// The result is complete: every field carries a value.
Json resolve_config(const Json& doc,
                    const std::optional<std::string>& preset_override = {});

// Every constraint violation in a resolved document, each prefixed by its
// field path. Empty when the document is valid.
std::vector<std::string> validate_config(const Json& resolved);

// Resolves, validates and converts. Throws ConfigError listing every
// violation.
ExperimentConfig parse_config(const Json& doc,
                              const std::optional<std::string>& preset_override = {});
// Reads and parses a JSON file. Throws std::runtime_error if unreadable and
// ConfigError on malformed JSON.
Json read_json_file(const std::string& path);

struct RunOptions {
  bool no_attack = false;
  int jobs = 1;
  // Write CSV files and the manifest into output_dir.
  bool write_outputs = true;
};

struct InferenceSummary {
  int round = 0;
  InferenceResult result;
  double inferred_to_true = 0.0;
  std::size_t augmented_rows = 0;
};

struct ExperimentResult {
  MetricSeries accuracy{"accuracy"};
  MetricSeries backdoor{"backdoor_success"};
  LabelDistribution population;
  std::vector<LabelDistribution> client_distributions;
  double original_to_true_mean = 0.0;
  std::vector<InferenceSummary> inferences;
  std::vector<int> aligned_clients;
  int injection_client = -1;
  std::optional<WindowStats> backdoor_window;
  ParamVector final_params;
  Json manifest;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const RunOptions& options = {});

}  // namespace fedalign

#endif  // FEDALIGN_EXPERIMENT_HPP_
