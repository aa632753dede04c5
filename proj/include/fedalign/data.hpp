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

#ifndef FEDALIGN_DATA_HPP_
#define FEDALIGN_DATA_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedalign/dataset.hpp"
#include "fedalign/rng.hpp"

namespace fedalign {

// Probability vector over C classes.
class LabelDistribution {
 public:
  LabelDistribution() = default;
  // Throws ConfigError unless entries are >= 0 and sum to 1 within 1e-9.
  explicit LabelDistribution(std::vector<double> probs);

  static LabelDistribution uniform(int num_classes);
  static LabelDistribution from_counts(std::span<const std::size_t> counts);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t c) const { return probs_[c]; }
  std::span<const double> probs() const { return probs_; }

 private:
  std::vector<double> probs_;
};

inline constexpr double kSimplexTolerance = 1e-9;

bool on_simplex(std::span<const double> p, double tol = kSimplexTolerance);

// Empirical class proportions. Throws ConfigError on an empty dataset.
LabelDistribution label_distribution(const Dataset& dataset);
double l2_distance(std::span<const double> p, std::span<const double> q);
double l2_distance(const LabelDistribution& p, const LabelDistribution& q);

// Isotropic Gaussian blobs: class centers ~ N(0, separation^2 I), samples
// ~ N(center, noise_std^2 I).
struct SyntheticSpec {
  int num_classes = 5;
  std::size_t feature_dim = 16;
  std::size_t per_class = 100;
  double separation = 1.0;
  double noise_std = 1.0;
  std::uint64_t seed = 0;
};

// Class centers depend only on spec.seed; `stream` selects an independent
// draw of samples from the same blobs (train / test / public pool).
Dataset synthesize(const SyntheticSpec& spec, std::uint64_t stream = 0);

// Raw IDX tensor of unsigned bytes.
struct IdxTensor {
  std::vector<std::size_t> dims;
  std::vector<std::uint8_t> data;
};

// Parses an in-memory IDX file. Only the unsigned-byte element type (0x08)
// is accepted. Throws ParseError with the failing byte offset.
IdxTensor parse_idx(std::span<const std::uint8_t> bytes);
IdxTensor read_idx_file(const std::string& path);

// Images (magic 0x00000803) scaled to [0, 1] plus labels (0x00000801).
Dataset load_idx_dataset(const std::string& images_path,
                         const std::string& labels_path, int num_classes);
Dataset idx_to_dataset(const IdxTensor& images, const IdxTensor& labels,
                       int num_classes);

// Keeps floor(f_c * n_c) samples of each class c, with f_c drawn uniformly
// from [keep_lo, keep_hi]. Surviving rows keep their original order.
Dataset global_downsample(const Dataset& dataset, double keep_lo,
                          double keep_hi, Rng& rng);

struct PartitionSpec {
  int n_clients = 10;
  double alpha = 1.0;
  std::optional<std::pair<double, double>> imbalance;
  std::uint64_t seed = 0;

  void validate() const;
};

inline constexpr int kPartitionRetryCap = 100;

// Splits `dataset` over spec.n_clients clients. For every class an
// independent Dirichlet(alpha) vector over clients decides how that class's
// (shuffled) samples are divided, rounded by largest remainder. Draws that
// leave a client empty are repeated up to kPartitionRetryCap times.
std::vector<Dataset> dirichlet_partition(const Dataset& dataset,
                                         const PartitionSpec& spec);

// Holds out round(fraction * n) random samples (the attacker's public pool).
// Returns {remaining, pool}.
std::pair<Dataset, Dataset> split_public_pool(const Dataset& dataset,
                                              double fraction, Rng& rng);

// Largest-remainder rounding of total * weights so that the result sums to
// exactly `total`. Ties go to the lower index.
std::vector<std::size_t> apportion(std::size_t total,
                                   std::span<const double> weights);

}  // namespace fedalign

#endif  // FEDALIGN_DATA_HPP_
