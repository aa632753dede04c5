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

#include "fedalign/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fedalign/errors.hpp"

namespace fedalign {

void EvolutionConfig::validate() const {
  if (population_size < 2) {
    throw ConfigError("evolution.population_size must be >= 2");
  }
  if (nfe_budget < population_size) {
    throw ConfigError("evolution.nfe_budget must be >= population_size");
  }
  if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0) ||
      !(mutation_rate >= 0.0 && mutation_rate <= 1.0)) {
    throw ConfigError("evolution rates must be in [0, 1]");
  }
  if (!(mutation_scale >= 0.0)) {
    throw ConfigError("evolution.mutation_scale must be >= 0");
  }
}

ParamVector observe_global_update(const RoundLog& log) {
  return log.global_after - log.global_before;
}

ParamVector observe_global_update(const RoundLog& prev, const RoundLog& curr) {
  if (curr.round != prev.round + 1) {
    throw UsageError("observe_global_update needs consecutive rounds, got " +
                     std::to_string(prev.round) + " and " +
                     std::to_string(curr.round));
  }
  if (!prev.global_before.same_shape(curr.global_before)) {
    throw UsageError("round logs hold models of different shapes");
  }
  return curr.global_before - prev.global_before;
}

AugmentationResult augment_until_aligned(const Dataset& local,
                                         const NetworkArch& arch,
                                         const ParamVector& params,
                                         const AugmentationPolicy& policy,
                                         Rng& rng,
                                         const Dataset* public_pool) {
  policy.validate();
  const int classes = local.num_classes();
  AugmentationResult result;
  result.data = local;
  if (public_pool) result.data.append(*public_pool);
  result.class_available.assign(static_cast<std::size_t>(classes), false);
  result.final_cosine.assign(static_cast<std::size_t>(classes),
                             std::numeric_limits<double>::quiet_NaN());
  result.batches_added.assign(static_cast<std::size_t>(classes), 0);

  for (int c = 0; c < classes; ++c) {
    const auto uc = static_cast<std::size_t>(c);
    Dataset pool = result.data.subset(result.data.indices_of_class(c));
    if (pool.empty()) continue;
    result.class_available[uc] = true;
    Rng class_rng = rng.fork("class", uc);
    const std::size_t bases = pool.size();
    const auto cap = static_cast<std::size_t>(
        std::floor(policy.max_growth * static_cast<double>(bases)));
    ParamVector estimate = gradient(arch, params, Batch::of(pool));
    Dataset grown = pool.empty_like();
    while (pool.size() + grown.size() < cap) {
      const std::size_t current = pool.size() + grown.size();
      std::size_t want = std::max(
          policy.min_batch,
          static_cast<std::size_t>(std::ceil(policy.batch_fraction *
                                             static_cast<double>(current))));
      want = std::min(want, cap - current);
      Dataset batch = pool.empty_like();
      for (std::size_t k = 0; k < want; ++k) {
        const auto base = pool.sample(
            static_cast<std::size_t>(class_rng.uniform_index(bases)));
        batch.add(augment_sample(base, policy, class_rng, local.image_height(),
                                 local.image_width()));
      }
      const ParamVector batch_grad = gradient(arch, params, Batch::of(batch));
      const double cos = cosine_similarity(batch_grad.values(),
                                           estimate.values());
      grown.append(batch);
      ++result.batches_added[uc];
      result.final_cosine[uc] = cos;
      Dataset all = pool;
      all.append(grown);
      estimate = gradient(arch, params, Batch::of(all));
      if (policy.theta <= 0.0 || cos >= policy.theta) break;
    }
    result.data.append(grown);
  }
  return result;
}

DistributionObjective::DistributionObjective(NetworkArch arch,
                                             Dataset attacker_data,
                                             ParamVector start,
                                             ParamVector observed_update,
                                             int steps, double eta)
    : arch_(std::move(arch)),
      start_(std::move(start)),
      observed_(std::move(observed_update)),
      steps_(steps),
      eta_(eta) {
  arch_.validate();
  if (steps_ < 1) throw ConfigError("objective needs at least one step");
  if (!(eta_ > 0.0)) throw ConfigError("objective learning rate must be > 0");
  if (!start_.same_shape(observed_)) {
    throw ConfigError("observed update does not match the model");
  }
  const int classes = arch_.num_classes();
  by_class_.reserve(static_cast<std::size_t>(classes));
  unavailable_.assign(static_cast<std::size_t>(classes), false);
  for (int c = 0; c < classes; ++c) {
    by_class_.push_back(
        attacker_data.subset(attacker_data.indices_of_class(c)));
    unavailable_[static_cast<std::size_t>(c)] = by_class_.back().empty();
  }
  start_grads_ = class_gradients(start_);
}

bool DistributionObjective::degraded() const {
  return std::any_of(unavailable_.begin(), unavailable_.end(),
                     [](bool b) { return b; });
}

std::vector<ParamVector> DistributionObjective::class_gradients(
    const ParamVector& w) const {
  std::vector<ParamVector> out;
  out.reserve(by_class_.size());
  for (const auto& d : by_class_) {
    out.push_back(d.empty() ? ParamVector::zeros(arch_)
                            : gradient(arch_, w, Batch::of(d)));
  }
  return out;
}

ParamVector DistributionObjective::simulated_update(
    std::span<const double> p) const {
  if (p.size() != by_class_.size()) {
    throw ConfigError("distribution has the wrong number of classes");
  }
  ParamVector w = start_;
  for (int step = 0; step < steps_; ++step) {
    const std::vector<ParamVector> grads =
        step == 0 ? start_grads_ : class_gradients(w);
    ParamVector mixed = ParamVector::zeros(arch_);
    for (std::size_t c = 0; c < grads.size(); ++c) {
      mixed.add_scaled(grads[c], p[c]);
    }
    w.add_scaled(mixed, -eta_);
  }
  return w - start_;
}

double DistributionObjective::operator()(std::span<const double> p) const {
  return (observed_ - simulated_update(p)).norm();
}

double objective_value(std::span<const double> p,
                       const ParamVector& observed_update,
                       const Dataset& attacker, const NetworkArch& arch,
                       const ParamVector& start, int steps, double eta) {
  return DistributionObjective(arch, attacker, start, observed_update, steps,
                               eta)(p);
}

std::vector<double> project_to_simplex(std::span<const double> v) {
  if (v.empty()) throw ConfigError("cannot project an empty vector");
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double tau = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumulative += u[j];
    const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[j] - candidate > 0.0) tau = candidate;
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::max(v[i] - tau, 0.0);
  }
  return out;
}

InferenceResult infer_distribution(const EvolutionConfig& cfg, int num_classes,
                                   const SimplexObjective& objective,
                                   std::span<const std::vector<double>> seeds,
                                   EvolutionTrace* trace, int jobs) {
  cfg.validate();
  if (num_classes < 2) throw ConfigError("need at least 2 classes");
  const auto dim = static_cast<std::size_t>(num_classes);
  const auto pop_size = static_cast<std::size_t>(cfg.population_size);
  const Rng root = Rng(cfg.seed).fork("evolution");

  struct Individual {
    std::vector<double> p;
    double value = 0.0;
  };
  auto evaluate = [&](std::vector<Individual>& batch) {
    parallel_for(batch.size(), jobs, [&](std::size_t i) {
      batch[i].value = objective(batch[i].p);
    });
    if (trace) {
      for (const auto& ind : batch) {
        trace->evaluated.push_back(ind.p);
        trace->values.push_back(ind.value);
      }
    }
  };
  auto by_value = [](const Individual& a, const Individual& b) {
    return a.value < b.value;
  };

  std::vector<Individual> population;
  population.reserve(pop_size);
  for (const auto& s : seeds) {
    if (population.size() == pop_size) break;
    if (s.size() != dim) throw ConfigError("seed individual has wrong length");
    population.push_back({project_to_simplex(s), 0.0});
  }
  Rng init_rng = root.fork("init");
  while (population.size() < pop_size) {
    population.push_back({init_rng.dirichlet(1.0, dim), 0.0});
  }
  evaluate(population);
  int nfe = static_cast<int>(population.size());
  std::stable_sort(population.begin(), population.end(), by_value);

  InferenceResult result;
  result.best_per_generation.push_back(population.front().value);

  for (std::uint64_t gen = 1; nfe < cfg.nfe_budget; ++gen) {
    const auto n_children = static_cast<std::size_t>(
        std::min<int>(cfg.population_size, cfg.nfe_budget - nfe));
    std::vector<Individual> children(n_children);
    const Rng gen_rng = root.fork("generation", gen);
    for (std::size_t i = 0; i < n_children; ++i) {
      Rng rng = gen_rng.fork(i);
      const auto a = static_cast<std::size_t>(rng.uniform_index(pop_size));
      auto b = static_cast<std::size_t>(rng.uniform_index(pop_size - 1));
      if (b >= a) ++b;
      std::vector<double> child = population[a].p;
      if (rng.uniform() < cfg.crossover_rate) {
        for (std::size_t c = 0; c < dim; ++c) {
          if (rng.uniform() < 0.5) child[c] = population[b].p[c];
        }
      }
      for (std::size_t c = 0; c < dim; ++c) {
        if (rng.uniform() < cfg.mutation_rate) {
          child[c] += rng.normal(0.0, cfg.mutation_scale);
        }
        child[c] = std::max(child[c], 0.0);
      }
      children[i].p = project_to_simplex(child);
    }
    evaluate(children);
    nfe += static_cast<int>(n_children);
    // Parents first so ties keep the incumbent.
    population.insert(population.end(),
                      std::make_move_iterator(children.begin()),
                      std::make_move_iterator(children.end()));
    std::stable_sort(population.begin(), population.end(), by_value);
    population.resize(pop_size);
    result.best_per_generation.push_back(population.front().value);
  }

  result.p_hat = LabelDistribution(population.front().p);
  result.objective = population.front().value;
  result.nfe_used = nfe;
  result.unreliable.assign(dim, false);
  return result;
}

}  // namespace fedalign
