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

#ifndef FEDALIGN_ENGINE_HPP_
#define FEDALIGN_ENGINE_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedalign/dataset.hpp"
#include "fedalign/defenses.hpp"
#include "fedalign/model.hpp"
#include "fedalign/rng.hpp"
#include "fedalign/update.hpp"

namespace fedalign {

enum class BatchMode { kFull, kMinibatch };

BatchMode parse_batch_mode(const std::string& name);
std::string to_string(BatchMode mode);

// Local training schedule. In kFull mode local_steps counts gradient-descent
// steps on the whole client dataset; in kMinibatch mode it counts epochs of
// shuffled minibatches of batch_size.
struct RoundConfig {
  int clients_per_round = 10;
  int local_steps = 1;
  double local_lr = 0.1;
  BatchMode batch_mode = BatchMode::kFull;
  std::size_t batch_size = 128;

  void validate(int n_clients) const;
};

struct RoundLog {
  int round = 0;
  std::vector<int> selected;
  ParamVector global_before;
  ParamVector global_after;
  // Submitted updates after any client-side defense, sorted by client id.
  std::vector<ClientUpdate> updates;
  // Effective aggregation weight of each update (sums to 1 unless every
  // FoolsGold weight is zero).
  std::vector<double> weights;
  double clip_bound = 0.0;
  std::map<std::string, double> metrics;
};

// K distinct client ids drawn uniformly from [0, N), returned sorted.
std::vector<int> select_clients(Rng& rng, int n, int k);

// Trains from `global` on `client` and returns final - initial parameters.
// `rng` is used only to shuffle minibatches.
ClientUpdate local_train(const NetworkArch& arch, const Dataset& client,
                         const ParamVector& global, const RoundConfig& cfg,
                         Rng& rng);

// `epochs` passes of minibatch SGD over `data`, reshuffled every pass. The
// last minibatch of a pass may be short.
ParamVector minibatch_descent(const NetworkArch& arch, const Dataset& data,
                              const ParamVector& start, int epochs,
                              std::size_t batch_size, double lr, Rng& rng);

// w + sum_k (n_k / n) delta_k with n = sum_k n_k. Updates are summed in
// ascending client-id order regardless of input order.
ParamVector aggregate(const ParamVector& global,
                      std::span<const ClientUpdate> updates);

// Same, with each n_k multiplied by multipliers[k] (FoolsGold). If every
// effective weight is zero the global model is returned unchanged.
ParamVector aggregate_weighted(const ParamVector& global,
                               std::span<const ClientUpdate> updates,
                               std::span<const double> multipliers,
                               std::vector<double>* effective = nullptr);

// Full-batch gradient descent on the whole population, starting exactly at
// `start`.
ParamVector centralized_train(const NetworkArch& arch, const Dataset& data,
                              const ParamVector& start, int steps, double eta);

// centralized_train with every iterate and the per-class gradients used at
// each step recorded. params[0] == start; class_grads[tau][c] is taken at
// params[tau].
struct CentralizedTrace {
  std::vector<ParamVector> params;
  std::vector<std::vector<std::optional<ParamVector>>> class_grads;
};
CentralizedTrace centralized_train_traced(const NetworkArch& arch,
                                          const Dataset& data,
                                          const ParamVector& start, int steps,
                                          double eta);

// What a participant can see when asked for its update.
struct RoundContext {
  int round = 0;
  std::span<const int> selected;
  const ParamVector* global = nullptr;
  // Sum of the selected clients' sample counts.
  std::size_t total_samples = 0;
};

// Per-round attacker interface. Calls for distinct clients of one round may
// run concurrently, so client_update must not mutate shared state.
class Adversary {
 public:
  virtual ~Adversary() = default;

  // Clients that must be selected in this round.
  virtual std::vector<int> forced_participants(int round) const {
    (void)round;
    return {};
  }
  // Replacement update for a controlled client, or nullopt to train it as a
  // benign client.
  virtual std::optional<ClientUpdate> client_update(const RoundContext& ctx,
                                                    int client_id) const {
    (void)ctx;
    (void)client_id;
    return std::nullopt;
  }
  // Serial hook after aggregation.
  virtual void on_round_complete(const RoundLog& log) { (void)log; }
};

// FedAvg with pluggable server/client defenses. Rounds are numbered from 1.
class FederatedSimulation {
 public:
  FederatedSimulation(NetworkArch arch, std::vector<Dataset> clients,
                      RoundConfig round_config, DefenseConfig defense,
                      ParamVector initial, std::uint64_t seed);

  const NetworkArch& arch() const { return arch_; }
  const std::vector<Dataset>& clients() const { return clients_; }
  const RoundConfig& round_config() const { return round_config_; }
  const ParamVector& global() const { return global_; }
  int next_round() const { return next_round_; }
  int num_clients() const { return static_cast<int>(clients_.size()); }

  // Worker threads for local training; 1 runs inline.
  void set_jobs(int jobs) { jobs_ = jobs < 1 ? 1 : jobs; }

  // Executes one round. Errors from any client are rethrown with the round
  // number prepended.
  RoundLog run_round(Adversary* adversary = nullptr);

  // Streams derived from the simulation seed.
  Rng selection_rng(int round) const;
  Rng training_rng(int round, int client_id) const;
  Rng dp_rng(int round, int client_id) const;

 private:
  NetworkArch arch_;
  std::vector<Dataset> clients_;
  RoundConfig round_config_;
  DefenseConfig defense_;
  ParamVector global_;
  Rng root_;
  GradientHistory history_;
  int next_round_ = 1;
  int jobs_ = 1;
};

using RoundCallback = std::function<void(RoundLog&)>;

// Runs `rounds` rounds; `on_round` may attach metrics before the log is
// stored.
std::vector<RoundLog> run_training(FederatedSimulation& sim, int rounds,
                                   Adversary* adversary = nullptr,
                                   const RoundCallback& on_round = {});

// Runs fn(i) for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, int jobs,
                  const std::function<void(std::size_t)>& fn);

}  // namespace fedalign

#endif  // FEDALIGN_ENGINE_HPP_
