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

#ifndef FEDALIGN_ATTACK_HPP_
#define FEDALIGN_ATTACK_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "fedalign/aux_builder.hpp"
#include "fedalign/backdoor.hpp"
#include "fedalign/engine.hpp"
#include "fedalign/inference.hpp"

namespace fedalign {

// Injection of the scaled backdoor update by `client_id` in `round`. The
// client is forced into that round's selection.
struct Injection {
  int round = 0;
  int client_id = 0;
};

struct AttackPlan {
  // Clients that switch to auxiliary data once the distribution is inferred.
  std::vector<int> aligned_clients;
  // Client whose local data drives the inference; -1 disables inference and
  // with it the preliminary phase.
  int inference_client = -1;
  // Rounds whose global update is inverted. After each one the auxiliary
  // sets are rebuilt from the mean of all estimates so far.
  std::vector<int> inference_rounds;
  std::vector<Injection> injections;

  AugmentationPolicy augmentation;
  EvolutionConfig evolution;
  // 0 means max(|D_k|, C) for each aligned client.
  std::size_t aux_size = 0;
  TriggerSpec trigger;
  PoisonConfig poison;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct InferenceRecord {
  int round = 0;
  InferenceResult result;
  std::vector<bool> class_available;
  std::size_t augmented_rows = 0;
};

// Preliminary phase (distribution inference followed by training on aligned
// auxiliary data) and single-shot backdoor injection as one adversary.
class TwoPhaseAttack : public Adversary {
 public:
  // `clients` and `public_pool` must outlive the attack. `round_config` is
  // the benign schedule, which the inference replays.
  TwoPhaseAttack(AttackPlan plan, NetworkArch arch,
                 const std::vector<Dataset>& clients, RoundConfig round_config,
                 const Dataset* public_pool = nullptr);

  std::vector<int> forced_participants(int round) const override;
  std::optional<ClientUpdate> client_update(const RoundContext& ctx,
                                            int client_id) const override;
  void on_round_complete(const RoundLog& log) override;

  const std::vector<InferenceRecord>& inferences() const { return records_; }
  bool aligned() const { return !aux_.empty(); }
  const std::map<int, Dataset>& auxiliary() const { return aux_; }

  // Gradient steps one benign update corresponds to for a client of `n`
  // rows under `cfg`.
  static int replay_steps(const RoundConfig& cfg, std::size_t n);

 private:
  InferenceRecord run_inference(const RoundLog& log) const;
  const Injection* injection_at(int round, int client_id) const;

  AttackPlan plan_;
  NetworkArch arch_;
  const std::vector<Dataset>* clients_;
  RoundConfig round_config_;
  const Dataset* pool_;
  Rng root_;
  std::vector<InferenceRecord> records_;
  std::map<int, Dataset> aux_;
};

}  // namespace fedalign

#endif  // FEDALIGN_ATTACK_HPP_
