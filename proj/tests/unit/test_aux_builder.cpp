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
#include <map>

#include "../support/oracles.hpp"
#include "fedalign/aux_builder.hpp"
#include "fedalign/data.hpp"
#include "fedalign/errors.hpp"

using namespace fedalign;

namespace {

using RowKey = std::pair<int, std::vector<double>>;

std::map<RowKey, int> rows_of(const Dataset& d, bool only_original = false) {
  std::map<RowKey, int> out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (only_original && d.augmented(i)) continue;
    ++out[{d.label(i), std::vector<double>(d.row(i).begin(), d.row(i).end())}];
  }
  return out;
}

Dataset blobs(std::vector<std::size_t> per_class, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d(4, static_cast<int>(per_class.size()));
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    for (std::size_t i = 0; i < per_class[c]; ++i) {
      std::vector<double> x(4);
      for (auto& v : x) v = rng.normal(static_cast<double>(c), 1.0);
      d.add(x, static_cast<int>(c));
    }
  }
  return d;
}

Dataset image_set(std::uint64_t seed) {
  Rng rng(seed);
  Dataset d(36, 3);
  d.set_image_shape(6, 6);
  for (int i = 0; i < 12; ++i) {
    std::vector<double> x(36);
    for (auto& v : x) v = rng.uniform();
    d.add(x, i % 3);
  }
  return d;
}

}  // namespace

TEST_CASE("own distribution at own size is a reshuffle") {
  const Dataset local = blobs({30, 12, 0, 8}, 1);
  AuxSpec spec;
  spec.total_size = local.size();
  spec.target = label_distribution(local);
  spec.seed = 4;
  const Dataset aux = build_auxiliary(local, spec, AugmentationPolicy{});
  CHECK(aux.class_counts() == local.class_counts());
  CHECK(rows_of(aux) == rows_of(local));
  CHECK(aux.augmented_count() == 0);
}

TEST_CASE("class counts follow largest-remainder rounding of M * target") {
  const Dataset local = blobs({80, 10, 25}, 2);
  AuxSpec spec;
  spec.total_size = 100;
  spec.target = LabelDistribution({0.5, 0.3, 0.2});
  spec.seed = 5;
  const Dataset aux = build_auxiliary(local, spec, AugmentationPolicy{});
  CHECK(aux.class_counts() == std::vector<std::size_t>{50, 30, 20});
  CHECK(aux.size() == 100);

  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = rng.dirichlet(1.0, 3);
    spec.target = LabelDistribution(p);
    spec.total_size = 37 + rng.uniform_index(100);
    const Dataset a = build_auxiliary(local, spec, AugmentationPolicy{});
    const auto dist = label_distribution(a);
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(std::abs(dist[c] - p[c]) <= 1.0 / static_cast<double>(spec.total_size));
    }
  }
}

TEST_CASE("downsampling never fabricates and augmentation never deletes") {
  const Dataset local = blobs({60, 5, 20}, 3);
  AuxSpec spec;
  spec.total_size = 90;
  spec.target = LabelDistribution({0.2, 0.5, 0.3});
  spec.seed = 7;
  const Dataset aux = build_auxiliary(local, spec, AugmentationPolicy{});
  const auto local_rows = rows_of(local);
  // Every non-augmented output row is a distinct original.
  for (const auto& [key, count] : rows_of(aux, true)) {
    auto it = local_rows.find(key);
    REQUIRE(it != local_rows.end());
    CHECK(count <= it->second);
  }
  // Class 1 was short: all five originals survive.
  std::size_t originals = 0;
  for (std::size_t i = 0; i < aux.size(); ++i) {
    if (aux.label(i) == 1 && !aux.augmented(i)) ++originals;
  }
  CHECK(originals == 5);
  CHECK(aux.class_counts()[1] == 45);
  // Class 2 is also short: 27 needed, 20 held.
  CHECK(aux.augmented_count() == 40 + 7);
}

TEST_CASE("construction is deterministic under the seed") {
  const Dataset local = blobs({10, 20, 30}, 4);
  AuxSpec spec;
  spec.total_size = 60;
  spec.target = LabelDistribution({0.4, 0.4, 0.2});
  spec.seed = 8;
  const Dataset a = build_auxiliary(local, spec, AugmentationPolicy{});
  const Dataset b = build_auxiliary(local, spec, AugmentationPolicy{});
  CHECK(std::vector<double>(a.features().begin(), a.features().end()) ==
        std::vector<double>(b.features().begin(), b.features().end()));
  CHECK(std::vector<int>(a.labels().begin(), a.labels().end()) ==
        std::vector<int>(b.labels().begin(), b.labels().end()));
}

TEST_CASE("a needed class with no source is a construction error") {
  const Dataset local = blobs({10, 0, 10}, 5);
  AuxSpec spec;
  spec.total_size = 30;
  spec.target = LabelDistribution({0.4, 0.2, 0.4});
  try {
    build_auxiliary(local, spec, AugmentationPolicy{});
    FAIL("expected ConstructionError");
  } catch (const ConstructionError& e) {
    CHECK(e.label() == 1);
    CHECK(std::string(e.what()).find("class 1") != std::string::npos);
  }
  // A public pool supplies the missing class.
  const Dataset pool = blobs({0, 3, 0}, 6);
  const Dataset aux = build_auxiliary(local, spec, AugmentationPolicy{}, &pool);
  CHECK(aux.class_counts()[1] == 6);
  std::size_t raw = 0;
  for (std::size_t i = 0; i < aux.size(); ++i) {
    if (aux.label(i) == 1 && !aux.augmented(i)) ++raw;
  }
  CHECK(raw == 3);
  // A zero target for the missing class needs nothing.
  spec.target = LabelDistribution({0.5, 0.0, 0.5});
  CHECK(build_auxiliary(local, spec, AugmentationPolicy{}).size() == 30);
}

TEST_CASE("aux spec validation") {
  const Dataset local = blobs({5, 5}, 7);
  AuxSpec spec;
  spec.total_size = 1;
  spec.target = LabelDistribution({0.5, 0.5});
  CHECK_THROWS_AS(build_auxiliary(local, spec, AugmentationPolicy{}), ConfigError);
}

TEST_CASE("image transforms") {
  const Dataset imgs = image_set(8);
  const auto x = imgs.row(0);
  const std::vector<double> orig(x.begin(), x.end());
  CHECK(apply_image_transform(x, 6, 6, ImageTransform{}) == orig);

  ImageTransform full_turn;
  full_turn.rotation_deg = 360.0;
  const auto turned = apply_image_transform(x, 6, 6, full_turn);
  for (std::size_t i = 0; i < orig.size(); ++i) {
    CHECK(std::abs(turned[i] - orig[i]) < 1e-6);
  }

  ImageTransform shift;
  shift.shift_x = 1.0;
  const auto moved = apply_image_transform(x, 6, 6, shift);
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t c = 1; c < 6; ++c) {
      CHECK(moved[r * 6 + c] == doctest::Approx(orig[r * 6 + c - 1]));
    }
  }
}

TEST_CASE("augmentation preserves labels over many random draws") {
  const Dataset imgs = image_set(9);
  const Dataset vecs = blobs({4, 4, 4}, 10);
  AugmentationPolicy policy;
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t k = rng.uniform_index(12);
    const Sample s = imgs.sample(k);
    const Sample a = augment_sample(s, policy, rng, 6, 6);
    CHECK(a.label == s.label);
    CHECK(a.augmented);
    CHECK(a.features.size() == s.features.size());
    const Sample v = vecs.sample(k);
    const Sample b = augment_sample(v, policy, rng);
    CHECK(b.label == v.label);
    CHECK(b.features != v.features);
  }
}

TEST_CASE("augmentation policy validation") {
  AugmentationPolicy p;
  p.theta = 1.5;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p.theta = 0.8;
  p.max_growth = 0.5;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}
