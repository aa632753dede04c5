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

#ifndef FEDALIGN_INFERENCE_HPP_
#define FEDALIGN_INFERENCE_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "fedalign/aux_builder.hpp"
#include "fedalign/data.hpp"
#include "fedalign/engine.hpp"
#include "fedalign/model.hpp"

namespace fedalign {

// Settings of the evolutionary search over the probability simplex.
struct EvolutionConfig {
  int population_size = 20;
  int nfe_budget = 400;
  double crossover_rate = 0.9;
  double mutation_rate = 0.5;
  double mutation_scale = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
};

struct InferenceResult {
  LabelDistribution p_hat;
  double objective = 0.0;
  int nfe_used = 0;
  // Classes whose per-class gradient was unavailable (zero-substituted);
  // their p_hat coordinates carry no information.
  std::vector<bool> unreliable;
  // Best objective after initialization (index 0) and each generation.
  std::vector<double> best_per_generation;
};

// Global update Delta w^T seen by a participant between two consecutive
// synchronizations: curr.global_before - prev.global_before. Throws
// UsageError unless curr.round == prev.round + 1.
ParamVector observe_global_update(const RoundLog& prev, const RoundLog& curr);
// The same quantity read from a single round: global_after - global_before.
ParamVector observe_global_update(const RoundLog& log);

struct AugmentationResult {
  Dataset data;
  // False where a class had neither local nor public-pool samples.
  std::vector<bool> class_available;
  // Cosine between the last augmentation batch's gradient and the running
  // estimate it was compared against; NaN if no batch was added.
  std::vector<double> final_cosine;
  std::vector<int> batches_added;
};

// Grows every present class with augmentation batches until the gradient of
// the newest batch is within cosine theta of the running per-class gradient
// estimate, or the class reaches max_growth times its starting size. Public
// pool rows, when given, join the starting set.
AugmentationResult augment_until_aligned(const Dataset& local,
                                         const NetworkArch& arch,
                                         const ParamVector& params,
                                         const AugmentationPolicy& policy,
                                         Rng& rng,
                                         const Dataset* public_pool = nullptr);

// Objective of the distribution search: replays `steps` gradient steps from
// `start` where each step uses sum_c p(c) * per-class gradient on the
// attacker's data, and returns ||observed - simulated update||.
class DistributionObjective {
 public:
  DistributionObjective(NetworkArch arch, Dataset attacker_data,
                        ParamVector start, ParamVector observed_update,
                        int steps, double eta);

  double operator()(std::span<const double> p) const;
  ParamVector simulated_update(std::span<const double> p) const;

  // Classes with no attacker samples; their gradient is taken as zero.
  const std::vector<bool>& unavailable() const { return unavailable_; }
  bool degraded() const;
  int num_classes() const { return arch_.num_classes(); }

 private:
  std::vector<ParamVector> class_gradients(const ParamVector& w) const;

  NetworkArch arch_;
  std::vector<Dataset> by_class_;
  ParamVector start_;
  ParamVector observed_;
  int steps_;
  double eta_;
  std::vector<bool> unavailable_;
  // Gradients at `start`, reused by every evaluation's first step.
  std::vector<ParamVector> start_grads_;
};

double objective_value(std::span<const double> p,
                       const ParamVector& observed_update,
                       const Dataset& attacker, const NetworkArch& arch,
                       const ParamVector& start, int steps, double eta);

// Euclidean projection onto {p : p >= 0, sum p = 1}.
std::vector<double> project_to_simplex(std::span<const double> v);

using SimplexObjective = std::function<double(std::span<const double>)>;

// Optional record of every evaluated individual, for property checks.
struct EvolutionTrace {
  std::vector<std::vector<double>> evaluated;
  std::vector<double> values;
};

// Elitist (mu + lambda) genetic search: uniform crossover, per-coordinate
// Gaussian mutation, clamp at zero and simplex projection. `seeds` (projected
// onto the simplex) fill the initial population before Dirichlet(1) draws.
// Stops when the NFE budget is spent and returns the best individual seen.
InferenceResult infer_distribution(const EvolutionConfig& cfg,
                                   int num_classes,
                                   const SimplexObjective& objective,
                                   std::span<const std::vector<double>> seeds = {},
                                   EvolutionTrace* trace = nullptr,
                                   int jobs = 1);

}  // namespace fedalign

#endif  // FEDALIGN_INFERENCE_HPP_
