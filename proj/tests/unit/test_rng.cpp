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
#include <set>

#include "fedalign/rng.hpp"

using namespace fedalign;

TEST_CASE("streams are reproducible and forks leave the parent untouched") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42);
  const Rng child = c.fork("x");
  CHECK(c.counter() == 0);
  CHECK(child.key() != c.key());
  CHECK(c.fork("x").key() == child.key());
  CHECK(c.fork("x", 1).key() != c.fork("x", 2).key());
  CHECK(c.fork(std::uint64_t{3}).key() != c.fork(std::uint64_t{4}).key());
}

TEST_CASE("derive_seed separates labels") {
  std::set<std::uint64_t> seen;
  for (const char* label : {"dataset", "partition", "init", "simulation", "attack"}) {
    CHECK(seen.insert(derive_seed(7, label)).second);
  }
  CHECK(derive_seed(7, "dataset") == derive_seed(7, "dataset"));
  CHECK(derive_seed(7, "dataset") != derive_seed(8, "dataset"));
}

TEST_CASE("uniform draws stay in range and have the right moments") {
  Rng rng(1);
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK_FALSE((u < 0.0 || u >= 1.0));
    sum += u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform_open_left();
    CHECK((v > 0.0 && v <= 1.0));
  }
}

TEST_CASE("uniform_index is unbiased over a small range") {
  Rng rng(2);
  const int n = 60000;
  std::vector<int> counts(3);
  for (int i = 0; i < n; ++i) ++counts[rng.uniform_index(3)];
  // Binomial sd = sqrt(n p (1-p)) ~ 115; allow 4 sd.
  for (int c : counts) CHECK(std::abs(c - n / 3) < 4 * 116);
}

TEST_CASE("normal, gamma and Dirichlet moments") {
  Rng rng(3);
  const int n = 100000;
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    ss += z * z;
  }
  CHECK(std::abs(s / n) < 0.02);
  CHECK(ss / n == doctest::Approx(1.0).epsilon(0.02));

  for (double shape : {0.3, 1.0, 4.5}) {
    double g = 0.0;
    for (int i = 0; i < 50000; ++i) g += rng.gamma(shape);
    CHECK(g / 50000 == doctest::Approx(shape).epsilon(0.03));
  }

  std::vector<double> mean(4);
  for (int i = 0; i < 20000; ++i) {
    const auto p = rng.dirichlet(0.5, 4);
    double total = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(p[k] >= 0.0);
      total += p[k];
      mean[k] += p[k];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  for (double m : mean) CHECK(m / 20000 == doctest::Approx(0.25).epsilon(0.04));
}

TEST_CASE("sample_without_replacement returns distinct indices") {
  Rng rng(4);
  const auto s = sample_without_replacement(rng, 10, 10);
  CHECK(std::set<int>(s.begin(), s.end()).size() == 10);
  const auto t = sample_without_replacement(rng, 100, 7);
  CHECK(t.size() == 7);
  CHECK(std::set<int>(t.begin(), t.end()).size() == 7);
  for (int v : t) CHECK((v >= 0 && v < 100));
}

TEST_CASE("shuffle is a seeded permutation") {
  std::vector<int> a(20), b(20);
  for (int i = 0; i < 20; ++i) a[static_cast<std::size_t>(i)] = b[static_cast<std::size_t>(i)] = i;
  Rng r1(9), r2(9);
  r1.shuffle(a);
  r2.shuffle(b);
  CHECK(a == b);
  std::set<int> all(a.begin(), a.end());
  CHECK(all.size() == 20);
}
