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

#ifndef FEDALIGN_BACKDOOR_HPP_
#define FEDALIGN_BACKDOOR_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "fedalign/dataset.hpp"
#include "fedalign/engine.hpp"
#include "fedalign/model.hpp"
#include "fedalign/rng.hpp"
#include "fedalign/update.hpp"

namespace fedalign {

// Fixed-pattern trigger: every feature index in `region` is overwritten with
// `value` and the label becomes `target_label`.
struct TriggerSpec {
  std::vector<std::size_t> region;
  double value = 1.0;
  int target_label = 0;

  // size x size block in the top-left corner of a height x width image.
  static TriggerSpec image_block(std::size_t width, std::size_t size,
                                 double value, int target_label);
  // The first `count` features of a flat vector.
  static TriggerSpec leading_features(std::size_t count, double value,
                                      int target_label);

  void validate(std::size_t feature_dim, int num_classes) const;
};

Sample apply_trigger(const Sample& sample, const TriggerSpec& trigger);

// Triggered copies of every row whose original label differs from the
// target label.
Dataset triggered_test_set(const Dataset& test, const TriggerSpec& trigger);

enum class GammaMode {
  kFixed,            // gamma as configured
  kClientsPerRound,  // gamma = K
  kSampleRatio,      // gamma = n / n_a over this round's participants
};

GammaMode parse_gamma_mode(const std::string& name);
std::string to_string(GammaMode mode);

struct PoisonConfig {
  std::size_t poisoned_per_batch = 40;
  std::size_t batch_size = 128;
  int poison_epochs = 10;
  double poison_lr = 0.05;
  double gamma = 10.0;
  GammaMode gamma_mode = GammaMode::kFixed;

  void validate() const;
};

// One shuffled pass over the local data, cut into minibatches whose first
// rows are triggered. Short batches poison round(ppb * len / batch_size)
// rows.
struct PoisonPartition {
  std::vector<Dataset> batches;  // mixed, poisoned rows first
  Dataset clean;
  Dataset poison;
};

PoisonPartition poison_partition(const Dataset& local, const PoisonConfig& cfg,
                                 const TriggerSpec& trigger, Rng& rng);

// poison_epochs passes of minibatch SGD at poison_lr over freshly poisoned
// batches. Returns the unscaled update tagged kBackdoor.
ClientUpdate backdoor_train(const NetworkArch& arch, const ParamVector& global,
                            const Dataset& local, const PoisonConfig& cfg,
                            const TriggerSpec& trigger, Rng& rng);

// delta * gamma; n_k and tags unchanged.
ClientUpdate scale_update(const ClientUpdate& update, double gamma);

// Gamma to use for a round under cfg.gamma_mode.
double resolve_gamma(const PoisonConfig& cfg, int clients_per_round,
                     std::size_t round_samples, std::size_t attacker_samples);

}  // namespace fedalign

#endif  // FEDALIGN_BACKDOOR_HPP_
