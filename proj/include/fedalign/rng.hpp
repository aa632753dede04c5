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

#ifndef FEDALIGN_RNG_HPP_
#define FEDALIGN_RNG_HPP_

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace fedalign {

// Version of the random stream layout. Bump whenever any draw below changes,
// since partitions and selections are expected to be reproducible across
// platforms and language ports for a given version.
inline constexpr int kRngVersion = 1;

// Counter-based 64-bit generator. Output i is a SplitMix64 finalizer applied
// to key + (i + 1) * golden_gamma, so any stream can be forked by deriving a
// new key without touching the state of the parent.
//
// All distributions are implemented here rather than through <random> so
// that draws do not depend on the standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : key_(key) {}

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  // Uniform on (0, 1].
  double uniform_open_left();
  double uniform(double lo, double hi);

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  // Standard normal via Box-Muller. No cached second variate, so the stream
  // position after k draws is always 2k.
  double normal();
  double normal(double mean, double stddev);

  // Gamma(shape, 1) via Marsaglia-Tsang; shape < 1 uses the boost
  // Gamma(shape + 1) * U^(1/shape).
  double gamma(double shape);

  // Symmetric Dirichlet(alpha) over `dim` categories, via normalized gammas.
  std::vector<double> dirichlet(double alpha, std::size_t dim);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }
  template <typename T>
  void shuffle(std::vector<T>& items) {
    shuffle(std::span<T>(items));
  }

  // Child stream keyed by a label and/or indices. Deterministic in (key,
  // label, index); does not advance this generator.
  Rng fork(std::string_view label) const;
  Rng fork(std::uint64_t index) const;
  Rng fork(std::string_view label, std::uint64_t index) const;

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);
// FNV-1a over the bytes of `label`, finalized with mix64.
std::uint64_t hash_label(std::string_view label);

// Labeled split of a master seed. Adding a new label never perturbs the
// streams of existing labels.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);

// k distinct indices drawn uniformly from [0, n), in draw order.
std::vector<int> sample_without_replacement(Rng& rng, int n, int k);

}  // namespace fedalign

#endif  // FEDALIGN_RNG_HPP_
