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

#include "fedalign/backdoor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedalign/errors.hpp"

namespace fedalign {

TriggerSpec TriggerSpec::image_block(std::size_t width, std::size_t size,
                                     double value, int target_label) {
  TriggerSpec t;
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) t.region.push_back(y * width + x);
  }
  t.value = value;
  t.target_label = target_label;
  return t;
}

TriggerSpec TriggerSpec::leading_features(std::size_t count, double value,
                                          int target_label) {
  TriggerSpec t;
  t.region.resize(count);
  std::iota(t.region.begin(), t.region.end(), std::size_t{0});
  t.value = value;
  t.target_label = target_label;
  return t;
}

void TriggerSpec::validate(std::size_t feature_dim, int num_classes) const {
  if (region.empty()) throw ConfigError("trigger region is empty");
  for (std::size_t i : region) {
    if (i >= feature_dim) {
      throw ConfigError("trigger index " + std::to_string(i) +
                        " outside feature range");
    }
  }
  if (target_label < 0 || target_label >= num_classes) {
    throw ConfigError("trigger target_label out of range");
  }
  if (!std::isfinite(value)) throw ConfigError("trigger value must be finite");
}

Sample apply_trigger(const Sample& sample, const TriggerSpec& trigger) {
  Sample out = sample;
  for (std::size_t i : trigger.region) out.features.at(i) = trigger.value;
  out.label = trigger.target_label;
  return out;
}

Dataset triggered_test_set(const Dataset& test, const TriggerSpec& trigger) {
  trigger.validate(test.feature_dim(), test.num_classes());
  Dataset out = test.empty_like();
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (test.label(i) == trigger.target_label) continue;
    out.add(apply_trigger(test.sample(i), trigger));
  }
  return out;
}

GammaMode parse_gamma_mode(const std::string& name) {
  if (name == "fixed") return GammaMode::kFixed;
  if (name == "clients_per_round") return GammaMode::kClientsPerRound;
  if (name == "sample_ratio") return GammaMode::kSampleRatio;
  throw ConfigError("unknown gamma mode '" + name + "'");
}

std::string to_string(GammaMode mode) {
  switch (mode) {
    case GammaMode::kFixed:
      return "fixed";
    case GammaMode::kClientsPerRound:
      return "clients_per_round";
    case GammaMode::kSampleRatio:
      return "sample_ratio";
  }
  return "?";
}

void PoisonConfig::validate() const {
  if (batch_size == 0) throw ConfigError("poison.batch_size must be > 0");
  if (poisoned_per_batch > batch_size) {
    throw ConfigError("poison.poisoned_per_batch exceeds poison.batch_size");
  }
  if (poison_epochs < 1) throw ConfigError("poison.epochs must be >= 1");
  if (!(poison_lr > 0.0)) throw ConfigError("poison.learning_rate must be > 0");
  if (!(gamma >= 1.0) || !std::isfinite(gamma)) {
    throw ConfigError("poison.gamma must be finite and >= 1");
  }
}

PoisonPartition poison_partition(const Dataset& local, const PoisonConfig& cfg,
                                 const TriggerSpec& trigger, Rng& rng) {
  cfg.validate();
  trigger.validate(local.feature_dim(), local.num_classes());
  if (local.empty()) throw ConfigError("cannot poison an empty dataset");
  PoisonPartition out;
  out.clean = local.empty_like();
  out.poison = local.empty_like();
  std::vector<std::size_t> order(local.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
    const std::size_t len = std::min(cfg.batch_size, order.size() - at);
    std::size_t n_poison = cfg.poisoned_per_batch;
    if (len < cfg.batch_size) {
      n_poison = static_cast<std::size_t>(std::llround(
          static_cast<double>(cfg.poisoned_per_batch * len) /
          static_cast<double>(cfg.batch_size)));
    }
    Dataset batch = local.empty_like();
    batch.reserve(len);
    for (std::size_t k = 0; k < len; ++k) {
      const std::size_t i = order[at + k];
      if (k < n_poison) {
        const Sample s = apply_trigger(local.sample(i), trigger);
        batch.add(s);
        out.poison.add(s);
      } else {
        batch.add(local.row(i), local.label(i), local.augmented(i));
        out.clean.add(local.row(i), local.label(i), local.augmented(i));
      }
    }
    out.batches.push_back(std::move(batch));
  }
  return out;
}

ClientUpdate backdoor_train(const NetworkArch& arch, const ParamVector& global,
                            const Dataset& local, const PoisonConfig& cfg,
                            const TriggerSpec& trigger, Rng& rng) {
  ParamVector w = global;
  for (int e = 0; e < cfg.poison_epochs; ++e) {
    const PoisonPartition part = poison_partition(local, cfg, trigger, rng);
    for (const Dataset& batch : part.batches) {
      w = sgd_step(w, gradient(arch, w, Batch::of(batch)), cfg.poison_lr);
      if (!w.all_finite()) {
        throw NumericError("backdoor training diverged");
      }
    }
  }
  return ClientUpdate{w - global, local.size(), local.owner_id(),
                      UpdateOrigin::kBackdoor, false};
}

ClientUpdate scale_update(const ClientUpdate& update, double gamma) {
  if (!std::isfinite(gamma)) throw ConfigError("gamma must be finite");
  ClientUpdate out = update;
  out.delta *= gamma;
  return out;
}

double resolve_gamma(const PoisonConfig& cfg, int clients_per_round,
                     std::size_t round_samples, std::size_t attacker_samples) {
  switch (cfg.gamma_mode) {
    case GammaMode::kFixed:
      return cfg.gamma;
    case GammaMode::kClientsPerRound:
      return static_cast<double>(clients_per_round);
    case GammaMode::kSampleRatio:
      if (attacker_samples == 0) throw ConfigError("attacker has no samples");
      return static_cast<double>(round_samples) /
             static_cast<double>(attacker_samples);
  }
  return cfg.gamma;
}

}  // namespace fedalign
