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

#include "fedalign/engine.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "fedalign/errors.hpp"

namespace fedalign {
namespace {

std::vector<std::size_t> order_by_client(std::span<const ClientUpdate> updates) {
  std::vector<std::size_t> order(updates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return updates[a].client_id < updates[b].client_id;
  });
  return order;
}

void require_finite(const ParamVector& p, const char* what) {
  if (!p.all_finite()) throw NumericError(std::string("non-finite ") + what);
}

}  // namespace

BatchMode parse_batch_mode(const std::string& name) {
  if (name == "full") return BatchMode::kFull;
  if (name == "minibatch") return BatchMode::kMinibatch;
  throw ConfigError("unknown batch mode '" + name + "'");
}

std::string to_string(BatchMode mode) {
  return mode == BatchMode::kFull ? "full" : "minibatch";
}

void RoundConfig::validate(int n_clients) const {
  if (clients_per_round < 1 || clients_per_round > n_clients) {
    throw ConfigError("clients_per_round must be in [1, num_clients]");
  }
  if (local_steps < 1) throw ConfigError("local_steps must be >= 1");
  if (!(local_lr > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (batch_mode == BatchMode::kMinibatch && batch_size == 0) {
    throw ConfigError("batch_size must be > 0");
  }
}

std::vector<int> select_clients(Rng& rng, int n, int k) {
  if (k < 1 || k > n) throw ConfigError("select_clients needs 1 <= K <= N");
  auto ids = sample_without_replacement(rng, n, k);
  std::sort(ids.begin(), ids.end());
  return ids;
}

ParamVector minibatch_descent(const NetworkArch& arch, const Dataset& data,
                              const ParamVector& start, int epochs,
                              std::size_t batch_size, double lr, Rng& rng) {
  if (batch_size == 0) throw ConfigError("batch_size must be > 0");
  ParamVector w = start;
  std::vector<std::size_t> order(data.size());
  for (int e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    for (std::size_t at = 0; at < order.size(); at += batch_size) {
      const std::size_t end = std::min(order.size(), at + batch_size);
      const Dataset batch = data.subset(
          std::span<const std::size_t>(order).subspan(at, end - at));
      w = sgd_step(w, gradient(arch, w, Batch::of(batch)), lr);
      require_finite(w, "parameters during local training");
    }
  }
  return w;
}

ClientUpdate local_train(const NetworkArch& arch, const Dataset& client,
                         const ParamVector& global, const RoundConfig& cfg,
                         Rng& rng) {
  if (client.empty()) throw ConfigError("local_train on an empty client");
  ParamVector w = global;
  if (cfg.batch_mode == BatchMode::kFull) {
    const Batch all = Batch::of(client);
    for (int step = 0; step < cfg.local_steps; ++step) {
      w = sgd_step(w, gradient(arch, w, all), cfg.local_lr);
      require_finite(w, "parameters during local training");
    }
  } else {
    w = minibatch_descent(arch, client, global, cfg.local_steps,
                          cfg.batch_size, cfg.local_lr, rng);
  }
  return ClientUpdate{w - global, client.size(), client.owner_id(),
                      UpdateOrigin::kBenign, false};
}

ParamVector aggregate(const ParamVector& global,
                      std::span<const ClientUpdate> updates) {
  const std::vector<double> ones(updates.size(), 1.0);
  return aggregate_weighted(global, updates, ones);
}

ParamVector aggregate_weighted(const ParamVector& global,
                               std::span<const ClientUpdate> updates,
                               std::span<const double> multipliers,
                               std::vector<double>* effective) {
  if (updates.empty()) throw ConfigError("aggregate needs at least one update");
  if (multipliers.size() != updates.size()) {
    throw ConfigError("one aggregation multiplier per update required");
  }
  const auto order = order_by_client(updates);
  double total = 0.0;
  for (std::size_t i : order) {
    if (!updates[i].delta.same_shape(global)) {
      throw ConfigError("update shape does not match the global model");
    }
    total += static_cast<double>(updates[i].n_k) * multipliers[i];
  }
  if (effective) effective->assign(updates.size(), 0.0);
  if (!(total > 0.0)) return global;
  ParamVector sum = ParamVector::zeros(global.arch());
  for (std::size_t i : order) {
    const double weight =
        static_cast<double>(updates[i].n_k) * multipliers[i] / total;
    if (effective) (*effective)[i] = weight;
    sum.add_scaled(updates[i].delta, weight);
  }
  ParamVector out = global;
  out += sum;
  return out;
}

ParamVector centralized_train(const NetworkArch& arch, const Dataset& data,
                              const ParamVector& start, int steps,
                              double eta) {
  if (steps < 0) throw ConfigError("steps must be >= 0");
  ParamVector w = start;
  const Batch all = Batch::of(data);
  for (int s = 0; s < steps; ++s) {
    w = sgd_step(w, gradient(arch, w, all), eta);
    require_finite(w, "parameters during centralized training");
  }
  return w;
}

CentralizedTrace centralized_train_traced(const NetworkArch& arch,
                                          const Dataset& data,
                                          const ParamVector& start, int steps,
                                          double eta) {
  if (steps < 0) throw ConfigError("steps must be >= 0");
  CentralizedTrace trace;
  trace.params.push_back(start);
  const Batch all = Batch::of(data);
  for (int s = 0; s < steps; ++s) {
    const ParamVector& w = trace.params.back();
    trace.class_grads.push_back(per_class_gradients(arch, w, data));
    ParamVector next = sgd_step(w, gradient(arch, w, all), eta);
    require_finite(next, "parameters during centralized training");
    trace.params.push_back(std::move(next));
  }
  return trace;
}

void parallel_for(std::size_t n, int jobs,
                  const std::function<void(std::size_t)>& fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

FederatedSimulation::FederatedSimulation(NetworkArch arch,
                                         std::vector<Dataset> clients,
                                         RoundConfig round_config,
                                         DefenseConfig defense,
                                         ParamVector initial,
                                         std::uint64_t seed)
    : arch_(std::move(arch)),
      clients_(std::move(clients)),
      round_config_(round_config),
      defense_(defense),
      global_(std::move(initial)),
      root_(Rng(seed).fork("federated_simulation")),
      history_(defense.history_depth) {
  arch_.validate();
  if (clients_.empty()) throw ConfigError("simulation needs at least 1 client");
  round_config_.validate(static_cast<int>(clients_.size()));
  defense_.validate();
  if (global_.arch() != arch_) {
    throw ConfigError("initial parameters do not match the architecture");
  }
  for (std::size_t k = 0; k < clients_.size(); ++k) {
    if (clients_[k].empty()) {
      throw ConfigError("client " + std::to_string(k) + " has no samples");
    }
    clients_[k].set_owner_id(static_cast<int>(k));
  }
}

Rng FederatedSimulation::selection_rng(int round) const {
  return root_.fork("select", static_cast<std::uint64_t>(round));
}

Rng FederatedSimulation::training_rng(int round, int client_id) const {
  return root_.fork("train", static_cast<std::uint64_t>(round))
      .fork(static_cast<std::uint64_t>(client_id));
}

Rng FederatedSimulation::dp_rng(int round, int client_id) const {
  return root_.fork("dp", static_cast<std::uint64_t>(round))
      .fork(static_cast<std::uint64_t>(client_id));
}

RoundLog FederatedSimulation::run_round(Adversary* adversary) {
  const int round = next_round_;
  const int n = num_clients();
  RoundLog log;
  log.round = round;
  log.global_before = global_;
  try {
    Rng select = selection_rng(round);
    std::vector<int> selected =
        select_clients(select, n, round_config_.clients_per_round);
    if (adversary) {
      // Forced clients replace the highest non-forced picks so the rest of
      // the draw is unchanged.
      const auto forced = adversary->forced_participants(round);
      for (int id : forced) {
        if (id < 0 || id >= n) {
          throw ConfigError("forced client " + std::to_string(id) +
                            " out of range");
        }
        if (std::find(selected.begin(), selected.end(), id) != selected.end()) {
          continue;
        }
        for (auto it = selected.rbegin(); it != selected.rend(); ++it) {
          if (std::find(forced.begin(), forced.end(), *it) == forced.end()) {
            *it = id;
            break;
          }
        }
        std::sort(selected.begin(), selected.end());
      }
    }
    log.selected = selected;

    RoundContext ctx;
    ctx.round = round;
    ctx.selected = selected;
    ctx.global = &global_;
    for (int id : selected) {
      ctx.total_samples += clients_[static_cast<std::size_t>(id)].size();
    }

    std::vector<ClientUpdate> updates(selected.size());
    parallel_for(selected.size(), jobs_, [&](std::size_t i) {
      const int id = selected[i];
      std::optional<ClientUpdate> replaced;
      if (adversary) replaced = adversary->client_update(ctx, id);
      if (replaced) {
        replaced->client_id = id;
        updates[i] = std::move(*replaced);
      } else {
        Rng rng = training_rng(round, id);
        updates[i] = local_train(arch_, clients_[static_cast<std::size_t>(id)],
                                 global_, round_config_, rng);
      }
      if (!updates[i].delta.all_finite()) {
        throw NumericError("client " + std::to_string(id) +
                           " produced a non-finite update");
      }
    });

    std::vector<double> multipliers(updates.size(), 1.0);
    switch (defense_.kind) {
      case DefenseKind::kNone:
        break;
      case DefenseKind::kLocalDp: {
        const double bound = defense_.clip_bound.value_or(
            median_clip_bound(updates));
        log.clip_bound = bound;
        if (bound > 0.0) {
          const double sigma = dp_sigma(defense_.dp_epsilon, defense_.dp_delta);
          for (auto& u : updates) {
            Rng rng = dp_rng(round, u.client_id);
            u = dp_perturb(u, bound, sigma, rng);
          }
        }
        break;
      }
      case DefenseKind::kFoolsGold: {
        for (const auto& u : updates) history_.record(u.client_id, u.delta);
        multipliers = foolsgold_weights(history_, selected,
                                        defense_.foolsgold_variant);
        break;
      }
    }
    global_ = aggregate_weighted(global_, updates, multipliers, &log.weights);
    if (!global_.all_finite()) {
      throw NumericError("aggregation produced non-finite parameters");
    }
    log.updates = std::move(updates);
  } catch (const NumericError& e) {
    throw NumericError("round " + std::to_string(round) + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError("round " + std::to_string(round) + ": " + e.what());
  }
  log.global_after = global_;
  ++next_round_;
  if (adversary) adversary->on_round_complete(log);
  return log;
}

std::vector<RoundLog> run_training(FederatedSimulation& sim, int rounds,
                                   Adversary* adversary,
                                   const RoundCallback& on_round) {
  std::vector<RoundLog> logs;
  logs.reserve(static_cast<std::size_t>(std::max(rounds, 0)));
  for (int r = 0; r < rounds; ++r) {
    RoundLog log = sim.run_round(adversary);
    if (on_round) on_round(log);
    logs.push_back(std::move(log));
  }
  return logs;
}

}  // namespace fedalign
