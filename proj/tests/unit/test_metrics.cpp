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
#include <filesystem>
#include <fstream>
#include <sstream>

#include "../support/oracles.hpp"
#include "fedalign/errors.hpp"
#include "fedalign/metrics.hpp"

using namespace fedalign;

namespace {

// One-hot features of the label: a linear model with weight scale 10 on the
// diagonal is always right.
Dataset one_hot_set(int classes, int per_class) {
  Dataset d(static_cast<std::size_t>(classes), classes);
  for (int c = 0; c < classes; ++c) {
    std::vector<double> x(static_cast<std::size_t>(classes), 0.0);
    x[static_cast<std::size_t>(c)] = 1.0;
    for (int i = 0; i < per_class; ++i) d.add(x, c);
  }
  return d;
}

ParamVector diagonal_model(const NetworkArch& arch, int classes, double scale) {
  std::vector<double> v(arch.param_count(), 0.0);
  for (int c = 0; c < classes; ++c) {
    v[static_cast<std::size_t>(c * classes + c)] = scale;
  }
  return ParamVector(arch, v);
}

// Bias-only model always predicting `label`.
ParamVector constant_model(const NetworkArch& arch, int classes, int label) {
  std::vector<double> v(arch.param_count(), 0.0);
  v[static_cast<std::size_t>(classes * classes + label)] = 5.0;
  return ParamVector(arch, v);
}

std::vector<double> as_vec(const ParamVector& p) {
  return {p.values().begin(), p.values().end()};
}

double norm(const std::vector<double>& v) {
  return oracle::l2(v, std::vector<double>(v.size(), 0.0));
}

std::vector<double> full_grad(const NetworkArch& arch, const Dataset& d,
                              const std::vector<double>& w) {
  return as_vec(gradient(arch, ParamVector(arch, w), Batch::of(d)));
}

}  // namespace

TEST_CASE("main accuracy") {
  const int C = 4;
  const NetworkArch arch{{4, 4}, Activation::kTanh};
  const Dataset d = one_hot_set(C, 5);
  CHECK(main_accuracy(arch, diagonal_model(arch, C, 10.0), d) == 1.0);
  CHECK(main_accuracy(arch, constant_model(arch, C, 2), d) == 0.25);
  CHECK_THROWS_AS(main_accuracy(arch, diagonal_model(arch, C, 1.0), Dataset(4, 4)),
                  ConfigError);
}

TEST_CASE("accuracy on ten hand-counted samples") {
  // Linear 1 -> 2 model predicting class 1 iff x > 0.
  const NetworkArch arch{{1, 2}, Activation::kTanh};
  const ParamVector w(arch, {-1.0, 1.0, 0.0, 0.0});
  Dataset d(1, 2);
  const double xs[10] = {-2, -1, -0.5, 0.5, 1, 2, 3, -3, 0.1, -0.1};
  const int ys[10] = {0, 0, 1, 1, 1, 0, 1, 0, 0, 1};
  // Correct: rows 0, 1, 3, 4, 6, 7 -> 6 of 10.
  for (int i = 0; i < 10; ++i) d.add(std::vector<double>{xs[i]}, ys[i]);
  CHECK(main_accuracy(arch, w, d) == doctest::Approx(0.6));
}

TEST_CASE("backdoor success") {
  const int C = 4;
  const NetworkArch arch{{4, 4}, Activation::kTanh};
  const Dataset d = one_hot_set(C, 5);
  const TriggerSpec trig = TriggerSpec::leading_features(1, 1.0, 3);
  CHECK(backdoor_success(arch, constant_model(arch, C, 3), d, trig) == 1.0);
  CHECK(backdoor_success(arch, constant_model(arch, C, 1), d, trig) == 0.0);

  Dataset only_target(4, 4);
  only_target.add(std::vector<double>{0, 0, 0, 1}, 3);
  CHECK_THROWS_AS(backdoor_success(arch, constant_model(arch, C, 3), only_target, trig),
                  UndefinedMetricError);

  // A clean random model lands near chance.
  Rng rng(1);
  const NetworkArch big{{8, 16, 5}, Activation::kTanh};
  const Dataset test = oracle::random_dataset(rng, 8, 5, 4000);
  const TriggerSpec t8 = TriggerSpec::leading_features(2, 0.0, 0);
  double sum = 0.0;
  for (int i = 0; i < 20; ++i) {
    sum += backdoor_success(big, oracle::random_params(big, rng, 0.05), test, t8);
  }
  CHECK(std::abs(sum / 20 - 0.2) < 0.1);
}

TEST_CASE("metric series") {
  MetricSeries s("acc");
  s.add(1, 0.5);
  s.add(3, 0.7);
  CHECK_THROWS_AS(s.add(3, 0.1), UsageError);
  CHECK_THROWS_AS(s.add(2, 0.1), UsageError);
  CHECK(s.at(3) == 0.7);
  CHECK_THROWS_AS(s.at(2), UsageError);
  CHECK(s.mean_over(1, 3) == doctest::Approx(0.6));
  CHECK(series_to_csv(s) == "round,value\n1,0.5\n3,0.7\n");
  CHECK(format_double(0.1) == "0.1");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("success window statistics") {
  MetricSeries flat("b");
  for (int r = 1; r <= 30; ++r) flat.add(r, 0.75);
  const WindowStats f = success_window_stats(flat, 10);
  CHECK(f.mean == doctest::Approx(0.75));
  CHECK(f.std == doctest::Approx(0.0));
  CHECK(f.first_round == 10);
  CHECK(f.last_round == 19);

  // Decay 100, 90, ..., 10 starting at the injection round.
  MetricSeries decay("b");
  for (int r = 1; r <= 30; ++r) decay.add(r, r < 5 ? 0.0 : std::max(10.0, 100.0 - 10.0 * (r - 5)));
  const WindowStats d = success_window_stats(decay, 5);
  CHECK(d.mean == doctest::Approx(55.0));
  // Population std of 10..100 step 10.
  CHECK(d.std == doctest::Approx(std::sqrt(825.0)));

  CHECK_THROWS_AS(success_window_stats(flat, 25), UsageError);
  CHECK_NOTHROW(success_window_stats(flat, 21));
}

TEST_CASE("bound check: identical clients and zero steps") {
  Rng rng(2);
  const NetworkArch arch{{3, 4, 3}, Activation::kTanh};
  const Dataset d = oracle::random_dataset(rng, 3, 3, 30);
  const std::vector<Dataset> clients{d, d, d};
  const ParamVector w0 = oracle::random_params(arch, rng);
  const BoundCheck one = divergence_bound_check(arch, clients, w0, 1, 0.1);
  CHECK(one.global.lhs < 1e-12);
  for (const auto& r : one.per_client) {
    CHECK(r.lhs < 1e-12);
    CHECK(r.rhs < 1e-12);
  }
  const BoundCheck zero = divergence_bound_check(arch, clients, w0, 0, 0.1);
  CHECK(zero.global.lhs == 0.0);
  CHECK(zero.global.rhs == 0.0);
}

TEST_CASE("bound check agrees with a direct recomputation and holds") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const NetworkArch arch = oracle::random_arch(rng);
    const std::size_t dim = arch.layer_sizes.front();
    const int C = static_cast<int>(arch.layer_sizes.back());
    const int K = 2 + static_cast<int>(rng.uniform_index(3));
    std::vector<Dataset> clients;
    Dataset all(dim, C);
    for (int k = 0; k < K; ++k) {
      // Skewed clients: some classes may be missing locally.
      clients.push_back(oracle::random_dataset(rng, dim, C, 5 + rng.uniform_index(20),
                                               rng.uniform() < 0.5));
      all.append(clients.back());
    }
    const ParamVector w0 = oracle::random_params(arch, rng);
    const int t = 1 + static_cast<int>(rng.uniform_index(5));
    const double eta = rng.uniform(0.01, 0.5);
    const BoundCheck got = divergence_bound_check(arch, clients, w0, t, eta);

    // Trajectories.
    const double n = static_cast<double>(all.size());
    std::vector<std::vector<std::vector<double>>> local(K);
    std::vector<std::vector<double>> cen{as_vec(w0)};
    for (int s = 0; s < t; ++s) {
      cen.push_back(oracle::gd_loop(cen.back(), 1, eta, [&](const auto& w) {
        return full_grad(arch, all, w);
      }));
    }
    for (int k = 0; k < K; ++k) {
      local[k].push_back(as_vec(w0));
      for (int s = 0; s < t; ++s) {
        local[k].push_back(oracle::gd_loop(local[k].back(), 1, eta, [&](const auto& w) {
          return full_grad(arch, clients[k], w);
        }));
      }
    }
    const std::size_t P = arch.param_count();
    std::vector<double> avg(P, 0.0);
    for (int k = 0; k < K; ++k) {
      const double wk = clients[k].size() / n;
      for (std::size_t i = 0; i < P; ++i) avg[i] += wk * local[k][t][i];
    }
    CHECK(std::abs(got.global.lhs - oracle::l2(avg, cen[t])) < 1e-9);

    // Global RHS: per-class sums collapse to full-batch gradients.
    double rhs = 0.0;
    for (int s = 0; s < t; ++s) {
      std::vector<double> diff = full_grad(arch, all, cen[s]);
      for (auto& v : diff) v = -v;
      for (int k = 0; k < K; ++k) {
        const auto g = full_grad(arch, clients[k], local[k][s]);
        for (std::size_t i = 0; i < P; ++i) diff[i] += clients[k].size() / n * g[i];
      }
      rhs += eta * norm(diff);
    }
    CHECK(std::abs(got.global.rhs - rhs) < 1e-9 * (1.0 + rhs));
    CHECK(got.global.holds(1e-12 * (1.0 + rhs)));

    // Per-client RHS, split at the centralized iterate.
    const auto p_all = all.class_counts();
    for (int k = 0; k < K; ++k) {
      const auto pk = clients[k].class_counts();
      const double nk = static_cast<double>(clients[k].size());
      double rk = 0.0;
      for (int s = 0; s < t; ++s) {
        std::vector<double> a(P, 0.0), b = full_grad(arch, clients[k], local[k][s]);
        for (int c = 0; c < C; ++c) {
          if (p_all[c] == 0) continue;
          const auto gc = as_vec(per_class_gradient(arch, ParamVector(arch, cen[s]), all, c));
          const double pc = p_all[c] / n, pkc = pk[c] / nk;
          for (std::size_t i = 0; i < P; ++i) {
            a[i] += (pc - pkc) * gc[i];
            b[i] -= pkc * gc[i];
          }
        }
        rk += eta * (norm(a) + norm(b));
      }
      const BoundReport& r = got.per_client[k];
      CHECK(std::abs(r.lhs - oracle::l2(local[k][t], cen[t])) < 1e-9);
      CHECK(std::abs(r.rhs - rk) < 1e-9 * (1.0 + rk));
      CHECK(r.holds(1e-12 * (1.0 + rk)));
    }
  }
}

TEST_CASE("atomic file write") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "fedalign_metrics_test" / "nested";
  fs::remove_all(dir.parent_path());
  const std::string path = (dir / "out.csv").string();
  write_file_atomic(path, "a\n");
  write_file_atomic(path, "round,value\n");
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == "round,value\n");
  CHECK_FALSE(fs::exists(path + ".tmp"));
  fs::remove_all(dir.parent_path());
}
