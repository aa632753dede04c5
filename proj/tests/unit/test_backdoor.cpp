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

#include <cmath>

#include "fedalign/attack.hpp"
#include "fedalign/backdoor.hpp"
#include "fedalign/data.hpp"
#include "fedalign/engine.hpp"
#include "fedalign/errors.hpp"
#include "fedalign/metrics.hpp"

using namespace fedalign;

namespace {

struct Desk {
  NetworkArch arch{{16, 32, 5}, Activation::kTanh};
  Dataset train, test;
  std::vector<Dataset> clients;
  ParamVector w0;
  TriggerSpec trigger;

  explicit Desk(std::uint64_t seed) {
    SyntheticSpec spec;
    spec.per_class = 400;
    spec.seed = seed;
    train = synthesize(spec, 0);
    spec.per_class = 200;
    test = synthesize(spec, 1);
    PartitionSpec ps;
    ps.n_clients = 10;
    ps.alpha = 1.0;
    ps.seed = seed;
    clients = dirichlet_partition(train, ps);
    Rng rng(seed);
    w0 = init_params(arch, rng);
    trigger = TriggerSpec::leading_features(4, train.max_feature_value(), 0);
  }
};

}  // namespace

TEST_CASE("trigger application") {
  Sample s{{0.1, 0.2, 0.3, 0.4, 0.5, 0.6}, 3, false};
  const TriggerSpec t = TriggerSpec::leading_features(2, 9.0, 1);
  const Sample once = apply_trigger(s, t);
  CHECK(once.label == 1);
  CHECK(once.features[0] == 9.0);
  CHECK(once.features[1] == 9.0);
  for (std::size_t i = 2; i < 6; ++i) CHECK(once.features[i] == s.features[i]);
  const Sample twice = apply_trigger(once, t);
  CHECK(twice.features == once.features);
  CHECK(twice.label == once.label);

  const TriggerSpec block = TriggerSpec::image_block(28, 4, 1.0, 0);
  CHECK(block.region.size() == 16);
  CHECK(static_cast<double>(block.region.size()) / 784.0 ==
        doctest::Approx(0.0204).epsilon(0.01));
  CHECK(block.region[4] == 28);
  CHECK(block.region[15] == 3 * 28 + 3);
  CHECK_THROWS_AS(block.validate(80, 10), ConfigError);
  CHECK_NOTHROW(block.validate(784, 10));
  CHECK_THROWS_AS(TriggerSpec::leading_features(2, 1.0, 7).validate(6, 5),
                  ConfigError);
}

TEST_CASE("triggered test set drops target-label rows") {
  Desk d(1);
  const Dataset t = triggered_test_set(d.test, d.trigger);
  CHECK(t.size() == d.test.size() - d.test.class_counts()[0]);
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(t.label(i) == 0);
    CHECK(t.row(i)[0] == d.trigger.value);
  }
}

TEST_CASE("poison partition") {
  Desk d(2);
  const Dataset& local = d.clients[0];
  PoisonConfig cfg;
  cfg.batch_size = 32;
  cfg.poisoned_per_batch = 10;
  Rng rng(3);
  const PoisonPartition part = poison_partition(local, cfg, d.trigger, rng);
  CHECK(part.clean.size() + part.poison.size() == local.size());
  std::size_t rows = 0;
  for (std::size_t b = 0; b < part.batches.size(); ++b) {
    const Dataset& batch = part.batches[b];
    rows += batch.size();
    const std::size_t expected_poison =
        batch.size() == 32 ? 10
                           : static_cast<std::size_t>(
                                 std::llround(10.0 * batch.size() / 32.0));
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (i < expected_poison) {
        CHECK(batch.label(i) == 0);
        CHECK(batch.row(i)[0] == d.trigger.value);
      }
    }
  }
  CHECK(rows == local.size());
  for (std::size_t i = 0; i < part.poison.size(); ++i) {
    CHECK(part.poison.label(i) == d.trigger.target_label);
  }

  cfg.poisoned_per_batch = 0;
  Rng rng2(3);
  CHECK(poison_partition(local, cfg, d.trigger, rng2).poison.empty());

  cfg.poisoned_per_batch = 33;
  Rng rng3(3);
  CHECK_THROWS_AS(poison_partition(local, cfg, d.trigger, rng3), ConfigError);
  PoisonConfig defaults;
  CHECK(defaults.poisoned_per_batch == 40);
  CHECK(defaults.batch_size == 128);
  CHECK(defaults.gamma == 10.0);
}

TEST_CASE("no poison means benign minibatch training, bit for bit") {
  Desk d(3);
  PoisonConfig cfg;
  cfg.poisoned_per_batch = 0;
  cfg.batch_size = 32;
  cfg.poison_epochs = 3;
  cfg.poison_lr = 0.05;
  Rng a(4), b(4);
  const ClientUpdate bd =
      backdoor_train(d.arch, d.w0, d.clients[1], cfg, d.trigger, a);
  const ParamVector benign =
      minibatch_descent(d.arch, d.clients[1], d.w0, 3, 32, 0.05, b);
  CHECK(bd.delta == benign - d.w0);
  CHECK(bd.origin == UpdateOrigin::kBackdoor);
  CHECK(bd.n_k == d.clients[1].size());
}

TEST_CASE("backdoor training implants the trigger in the local model") {
  Desk d(4);
  // Pre-train a clean model first, as the attacker would receive one.
  const ParamVector clean = centralized_train(d.arch, d.train, d.w0, 60, 0.5);
  const double clean_acc = main_accuracy(d.arch, clean, d.test);
  Rng rng(5);
  const ClientUpdate u =
      backdoor_train(d.arch, clean, d.clients[2], PoisonConfig{}, d.trigger, rng);
  const ParamVector local = clean + u.delta;
  CHECK(backdoor_success(d.arch, local, d.test, d.trigger) > 0.9);
  CHECK(clean_acc - main_accuracy(d.arch, local, d.test) < 0.10);
}

TEST_CASE("scaling and model replacement") {
  Desk d(5);
  Rng rng(6);
  const ClientUpdate u =
      backdoor_train(d.arch, d.w0, d.clients[0], PoisonConfig{}, d.trigger, rng);
  CHECK(scale_update(u, 1.0).delta == u.delta);
  CHECK(scale_update(u, 3.0).n_k == u.n_k);
  CHECK_THROWS_AS(scale_update(u, std::nan("")), ConfigError);

  std::size_t n = 0;
  std::vector<ClientUpdate> ups;
  for (std::size_t k = 0; k < d.clients.size(); ++k) {
    n += d.clients[k].size();
    if (k != 0) {
      ups.push_back({ParamVector::zeros(d.arch), d.clients[k].size(),
                     static_cast<int>(k)});
    }
  }
  PoisonConfig pc;
  pc.gamma_mode = GammaMode::kSampleRatio;
  const double gamma = resolve_gamma(pc, 10, n, d.clients[0].size());
  ups.push_back(scale_update(u, gamma));
  const ParamVector replaced = aggregate(d.w0, ups);
  CHECK(max_abs_diff(replaced, d.w0 + u.delta) < 1e-12);

  pc.gamma_mode = GammaMode::kClientsPerRound;
  CHECK(resolve_gamma(pc, 7, n, 1) == 7.0);
  pc.gamma_mode = GammaMode::kFixed;
  CHECK(resolve_gamma(pc, 7, n, 1) == 10.0);
  pc.gamma = 0.5;
  CHECK_THROWS_AS(pc.validate(), ConfigError);
}

TEST_CASE("rounds before any attacker activity match a benign run exactly") {
  Desk d(6);
  RoundConfig rc;
  rc.clients_per_round = 5;
  AttackPlan plan;
  plan.aligned_clients = {1, 4};
  plan.inference_client = 1;
  plan.inference_rounds = {4};
  plan.injections = {{8, 3}};
  plan.trigger = d.trigger;
  plan.seed = 9;
  FederatedSimulation benign(d.arch, d.clients, rc, DefenseConfig{}, d.w0, 11);
  FederatedSimulation attacked(d.arch, d.clients, rc, DefenseConfig{}, d.w0, 11);
  TwoPhaseAttack attack(plan, d.arch, attacked.clients(), rc);
  const auto lb = run_training(benign, 10);
  const auto la = run_training(attacked, 10, &attack);
  for (int r = 0; r < 4; ++r) {
    CHECK(la[static_cast<std::size_t>(r)].global_after ==
          lb[static_cast<std::size_t>(r)].global_after);
  }
  CHECK_FALSE(la[9].global_after == lb[9].global_after);
  REQUIRE(attack.inferences().size() == 1);
  CHECK(attack.aligned());
  CHECK(attack.auxiliary().at(1).size() == d.clients[1].size());
  // The injecting client was forced into round 8 and tagged.
  const auto& inj = la[7];
  bool found = false;
  for (const auto& u : inj.updates) {
    if (u.client_id == 3) {
      found = true;
      CHECK(u.origin == UpdateOrigin::kBackdoor);
    }
  }
  CHECK(found);
}

TEST_CASE("gamma mode names") {
  CHECK(parse_gamma_mode("sample_ratio") == GammaMode::kSampleRatio);
  CHECK(to_string(GammaMode::kClientsPerRound) == "clients_per_round");
  CHECK_THROWS_AS(parse_gamma_mode("huge"), ConfigError);
}
