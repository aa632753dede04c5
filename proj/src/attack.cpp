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

#include "fedalign/attack.hpp"

#include <algorithm>

#include "fedalign/errors.hpp"

namespace fedalign {

TwoPhaseAttack::TwoPhaseAttack(AttackPlan plan, NetworkArch arch,
                               const std::vector<Dataset>& clients,
                               RoundConfig round_config,
                               const Dataset* public_pool)
    : plan_(std::move(plan)),
      arch_(std::move(arch)),
      clients_(&clients),
      round_config_(round_config),
      pool_(public_pool),
      root_(Rng(plan_.seed).fork("two_phase_attack")) {
  const int n = static_cast<int>(clients.size());
  auto check_id = [n](int id, const char* what) {
    if (id < 0 || id >= n) {
      throw ConfigError(std::string(what) + " " + std::to_string(id) +
                        " is not a client");
    }
  };
  for (int id : plan_.aligned_clients) check_id(id, "aligned client");
  if (plan_.inference_client >= 0) {
    check_id(plan_.inference_client, "inference client");
  }
  for (const auto& inj : plan_.injections) {
    check_id(inj.client_id, "injection client");
    if (inj.round < 1) throw ConfigError("injection round must be >= 1");
  }
  std::sort(plan_.inference_rounds.begin(), plan_.inference_rounds.end());
  if (!plan_.injections.empty()) {
    plan_.poison.validate();
    plan_.trigger.validate(arch_.input_dim(), arch_.num_classes());
  }
  if (plan_.inference_client >= 0 && !plan_.inference_rounds.empty()) {
    plan_.evolution.validate();
    plan_.augmentation.validate();
  }
}

int TwoPhaseAttack::replay_steps(const RoundConfig& cfg, std::size_t n) {
  if (cfg.batch_mode == BatchMode::kFull) return cfg.local_steps;
  const std::size_t batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  return cfg.local_steps * static_cast<int>(std::max<std::size_t>(1, batches));
}

std::vector<int> TwoPhaseAttack::forced_participants(int round) const {
  std::vector<int> out;
  for (const auto& inj : plan_.injections) {
    if (inj.round == round) out.push_back(inj.client_id);
  }
  return out;
}

const Injection* TwoPhaseAttack::injection_at(int round, int client_id) const {
  for (const auto& inj : plan_.injections) {
    if (inj.round == round && inj.client_id == client_id) return &inj;
  }
  return nullptr;
}

std::optional<ClientUpdate> TwoPhaseAttack::client_update(
    const RoundContext& ctx, int client_id) const {
  const Dataset& local = (*clients_)[static_cast<std::size_t>(client_id)];
  if (injection_at(ctx.round, client_id)) {
    Rng rng = root_.fork("backdoor", static_cast<std::uint64_t>(ctx.round))
                  .fork(static_cast<std::uint64_t>(client_id));
    const ClientUpdate raw =
        backdoor_train(arch_, *ctx.global, local, plan_.poison, plan_.trigger,
                       rng);
    const double gamma =
        resolve_gamma(plan_.poison, round_config_.clients_per_round,
                      ctx.total_samples, local.size());
    return scale_update(raw, gamma);
  }
  auto it = aux_.find(client_id);
  if (it == aux_.end()) return std::nullopt;
  Rng rng = root_.fork("aligned", static_cast<std::uint64_t>(ctx.round))
                .fork(static_cast<std::uint64_t>(client_id));
  ClientUpdate u = local_train(arch_, it->second, *ctx.global, round_config_,
                               rng);
  u.origin = UpdateOrigin::kAligned;
  return u;
}

InferenceRecord TwoPhaseAttack::run_inference(const RoundLog& log) const {
  const Dataset& local =
      (*clients_)[static_cast<std::size_t>(plan_.inference_client)];
  Rng rng = root_.fork("augment", static_cast<std::uint64_t>(log.round));
  AugmentationResult aug = augment_until_aligned(
      local, arch_, log.global_before, plan_.augmentation, rng, pool_);

  InferenceRecord rec;
  rec.round = log.round;
  rec.class_available = aug.class_available;
  rec.augmented_rows = aug.data.augmented_count();

  const int steps = replay_steps(round_config_, local.size());
  DistributionObjective objective(arch_, aug.data, log.global_before,
                                  observe_global_update(log), steps,
                                  round_config_.local_lr);
  EvolutionConfig evo = plan_.evolution;
  evo.seed = derive_seed(plan_.evolution.seed,
                         "inference_round_" + std::to_string(log.round));
  const LabelDistribution own = label_distribution(local);
  const std::vector<std::vector<double>> seeds{
      std::vector<double>(own.probs().begin(), own.probs().end())};
  rec.result = infer_distribution(
      evo, arch_.num_classes(),
      [&objective](std::span<const double> p) { return objective(p); },
      seeds, nullptr, plan_.jobs);
  rec.result.unreliable = objective.unavailable();
  return rec;
}

void TwoPhaseAttack::on_round_complete(const RoundLog& log) {
  if (plan_.inference_client < 0) return;
  if (!std::binary_search(plan_.inference_rounds.begin(),
                          plan_.inference_rounds.end(), log.round)) {
    return;
  }
  records_.push_back(run_inference(log));

  // Each inference only sees the clients selected in its round; the running
  // mean smooths that out. Auxiliary sets are rebuilt from it every time.
  std::vector<double> mean(static_cast<std::size_t>(arch_.num_classes()), 0.0);
  for (const auto& rec : records_) {
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += rec.result.p_hat[c];
  }
  for (double& v : mean) v /= static_cast<double>(records_.size());
  const LabelDistribution p_hat = records_.size() == 1
                                      ? records_.front().result.p_hat
                                      : LabelDistribution(mean);
  aux_.clear();
  for (int id : plan_.aligned_clients) {
    const Dataset& local = (*clients_)[static_cast<std::size_t>(id)];
    AuxSpec spec;
    // Tiny skewed clients still get one slot per class.
    spec.total_size = plan_.aux_size > 0
                          ? plan_.aux_size
                          : std::max(local.size(),
                                     static_cast<std::size_t>(local.num_classes()));
    spec.target = p_hat;
    spec.seed = root_.fork("aux", static_cast<std::uint64_t>(id)).next_u64();
    Dataset aux = build_auxiliary(local, spec, plan_.augmentation, pool_);
    aux.set_owner_id(id);
    aux_.emplace(id, std::move(aux));
  }
}

}  // namespace fedalign
