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

#include "fedalign/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "fedalign/errors.hpp"

namespace fedalign {

LabelDistribution::LabelDistribution(std::vector<double> probs)
    : probs_(std::move(probs)) {
  if (probs_.empty()) throw ConfigError("label distribution is empty");
  if (!on_simplex(probs_)) {
    throw ConfigError("label distribution is not on the probability simplex");
  }
}

LabelDistribution LabelDistribution::uniform(int num_classes) {
  if (num_classes < 1) throw ConfigError("need at least one class");
  return LabelDistribution(std::vector<double>(
      static_cast<std::size_t>(num_classes), 1.0 / num_classes));
}

LabelDistribution LabelDistribution::from_counts(
    std::span<const std::size_t> counts) {
  const std::size_t total =
      std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  if (total == 0) throw ConfigError("cannot normalize all-zero counts");
  std::vector<double> probs(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    probs[c] = static_cast<double>(counts[c]) / static_cast<double>(total);
  }
  return LabelDistribution(std::move(probs));
}

bool on_simplex(std::span<const double> p, double tol) {
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) return false;
    total += v;
  }
  return std::abs(total - 1.0) <= tol;
}

LabelDistribution label_distribution(const Dataset& dataset) {
  if (dataset.empty()) {
    throw ConfigError("label distribution of an empty dataset");
  }
  const auto counts = dataset.class_counts();
  return LabelDistribution::from_counts(counts);
}

double l2_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw ConfigError("distributions have different numbers of classes");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - q[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

double l2_distance(const LabelDistribution& p, const LabelDistribution& q) {
  return l2_distance(p.probs(), q.probs());
}

Dataset synthesize(const SyntheticSpec& spec, std::uint64_t stream) {
  if (spec.per_class == 0) throw ConfigError("synthetic per_class must be > 0");
  if (!(spec.noise_std >= 0.0)) {
    throw ConfigError("synthetic noise_std must be >= 0");
  }
  Dataset out(spec.feature_dim, spec.num_classes);
  const Rng root(spec.seed);
  Rng center_rng = root.fork("centers");
  std::vector<double> centers(static_cast<std::size_t>(spec.num_classes) *
                              spec.feature_dim);
  for (double& v : centers) v = center_rng.normal(0.0, spec.separation);

  Rng sample_rng = root.fork("samples", stream);
  out.reserve(spec.per_class * static_cast<std::size_t>(spec.num_classes));
  std::vector<double> x(spec.feature_dim);
  for (int c = 0; c < spec.num_classes; ++c) {
    const double* center =
        centers.data() + static_cast<std::size_t>(c) * spec.feature_dim;
    for (std::size_t s = 0; s < spec.per_class; ++s) {
      for (std::size_t j = 0; j < spec.feature_dim; ++j) {
        x[j] = sample_rng.normal(center[j], spec.noise_std);
      }
      out.add(x, c);
    }
  }
  return out;
}

IdxTensor parse_idx(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw ParseError("IDX header truncated", bytes.size());
  if (bytes[0] != 0 || bytes[1] != 0) {
    throw ParseError("IDX magic must start with two zero bytes",
                     bytes[0] != 0 ? 0 : 1);
  }
  if (bytes[2] != 0x08) {
    throw ParseError("unsupported IDX element type (only 0x08 unsigned byte)",
                     2);
  }
  const std::size_t ndims = bytes[3];
  if (ndims == 0) throw ParseError("IDX tensor has zero dimensions", 3);
  const std::size_t header = 4 + 4 * ndims;
  if (bytes.size() < header) {
    throw ParseError("IDX dimension table truncated", bytes.size());
  }
  IdxTensor out;
  std::size_t count = 1;
  for (std::size_t d = 0; d < ndims; ++d) {
    const std::size_t at = 4 + 4 * d;
    const std::size_t dim = (std::size_t{bytes[at]} << 24) |
                            (std::size_t{bytes[at + 1]} << 16) |
                            (std::size_t{bytes[at + 2]} << 8) |
                            std::size_t{bytes[at + 3]};
    out.dims.push_back(dim);
    count *= dim;
  }
  if (bytes.size() < header + count) {
    throw ParseError("IDX payload truncated: expected " +
                         std::to_string(count) + " data bytes",
                     bytes.size());
  }
  if (bytes.size() > header + count) {
    throw ParseError("IDX file has trailing bytes", header + count);
  }
  out.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header),
                  bytes.end());
  return out;
}

IdxTensor read_idx_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open IDX file '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_idx(bytes);
}

Dataset idx_to_dataset(const IdxTensor& images, const IdxTensor& labels,
                       int num_classes) {
  if (images.dims.size() != 3) {
    throw ConfigError("IDX image tensor must be 3-dimensional (magic 0x803)");
  }
  if (labels.dims.size() != 1) {
    throw ConfigError("IDX label tensor must be 1-dimensional (magic 0x801)");
  }
  if (images.dims[0] != labels.dims[0]) {
    throw ConfigError("IDX image and label counts differ");
  }
  const std::size_t h = images.dims[1];
  const std::size_t w = images.dims[2];
  Dataset out(h * w, num_classes);
  out.set_image_shape(h, w);
  out.reserve(images.dims[0]);
  std::vector<double> x(h * w);
  for (std::size_t i = 0; i < images.dims[0]; ++i) {
    for (std::size_t j = 0; j < h * w; ++j) {
      x[j] = images.data[i * h * w + j] / 255.0;
    }
    out.add(x, labels.data[i]);
  }
  return out;
}

Dataset load_idx_dataset(const std::string& images_path,
                         const std::string& labels_path, int num_classes) {
  return idx_to_dataset(read_idx_file(images_path), read_idx_file(labels_path),
                        num_classes);
}

Dataset global_downsample(const Dataset& dataset, double keep_lo,
                          double keep_hi, Rng& rng) {
  if (!(keep_lo > 0.0) || !(keep_hi <= 1.0) || keep_lo > keep_hi) {
    throw ConfigError("keep range must satisfy 0 < lo <= hi <= 1");
  }
  std::vector<std::size_t> kept;
  for (int c = 0; c < dataset.num_classes(); ++c) {
    auto idx = dataset.indices_of_class(c);
    const double f = rng.uniform(keep_lo, keep_hi);
    const auto keep = static_cast<std::size_t>(
        std::floor(f * static_cast<double>(idx.size())));
    if (!idx.empty() && keep == 0) {
      throw ConfigError("downsampling empties class " + std::to_string(c));
    }
    rng.shuffle(idx);
    kept.insert(kept.end(), idx.begin(),
                idx.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  std::sort(kept.begin(), kept.end());
  return dataset.subset(kept);
}

void PartitionSpec::validate() const {
  if (n_clients < 1) throw ConfigError("partition.num_clients must be >= 1");
  if (!(alpha > 0.0)) throw ConfigError("partition.alpha must be > 0");
  if (imbalance) {
    const auto [lo, hi] = *imbalance;
    if (!(lo > 0.0) || !(hi <= 1.0) || lo > hi) {
      throw ConfigError("partition.imbalance must satisfy 0 < lo <= hi <= 1");
    }
  }
}

std::vector<std::size_t> apportion(std::size_t total,
                                   std::span<const double> weights) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (weights.empty() || !(sum > 0.0)) {
    throw ConfigError("apportion needs positive total weight");
  }
  std::vector<std::size_t> out(weights.size());
  std::vector<double> remainder(weights.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(total) * weights[i] / sum;
    out[i] = static_cast<std::size_t>(std::floor(exact));
    remainder[i] = exact - static_cast<double>(out[i]);
    assigned += out[i];
  }
  // Floating error can push the floor sum past total; trim from the smallest
  // remainders in that case.
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return remainder[a] > remainder[b];
                   });
  for (std::size_t k = 0; assigned < total; k = (k + 1) % order.size()) {
    ++out[order[k]];
    ++assigned;
  }
  for (std::size_t k = order.size(); assigned > total;) {
    k = (k == 0 ? order.size() : k) - 1;
    if (out[order[k]] > 0) {
      --out[order[k]];
      --assigned;
    }
  }
  return out;
}

std::vector<Dataset> dirichlet_partition(const Dataset& dataset,
                                         const PartitionSpec& spec) {
  spec.validate();
  const auto n_clients = static_cast<std::size_t>(spec.n_clients);
  if (dataset.size() < n_clients) {
    throw ConfigError("fewer samples than clients");
  }
  const Rng root = Rng(spec.seed).fork("dirichlet_partition");
  for (int attempt = 0; attempt < kPartitionRetryCap; ++attempt) {
    Rng rng = root.fork("attempt", static_cast<std::uint64_t>(attempt));
    std::vector<std::vector<std::size_t>> owned(n_clients);
    for (int c = 0; c < dataset.num_classes(); ++c) {
      auto idx = dataset.indices_of_class(c);
      const auto q = rng.dirichlet(spec.alpha, n_clients);
      if (idx.empty()) continue;
      rng.shuffle(idx);
      const auto counts = apportion(idx.size(), q);
      std::size_t cursor = 0;
      for (std::size_t k = 0; k < n_clients; ++k) {
        owned[k].insert(owned[k].end(),
                        idx.begin() + static_cast<std::ptrdiff_t>(cursor),
                        idx.begin() +
                            static_cast<std::ptrdiff_t>(cursor + counts[k]));
        cursor += counts[k];
      }
    }
    if (std::any_of(owned.begin(), owned.end(),
                    [](const auto& v) { return v.empty(); })) {
      continue;
    }
    std::vector<Dataset> clients;
    clients.reserve(n_clients);
    for (std::size_t k = 0; k < n_clients; ++k) {
      std::sort(owned[k].begin(), owned[k].end());
      Dataset d = dataset.subset(owned[k]);
      d.set_owner_id(static_cast<int>(k));
      clients.push_back(std::move(d));
    }
    return clients;
  }
  throw ConfigError("Dirichlet partition left a client empty after " +
                    std::to_string(kPartitionRetryCap) + " draws");
}

std::pair<Dataset, Dataset> split_public_pool(const Dataset& dataset,
                                              double fraction, Rng& rng) {
  if (!(fraction >= 0.0) || fraction >= 1.0) {
    throw ConfigError("public pool fraction must be in [0, 1)");
  }
  std::vector<std::size_t> idx(dataset.size());
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx);
  const auto pool_size = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(dataset.size())));
  std::vector<std::size_t> pool(idx.begin(),
                                idx.begin() + static_cast<std::ptrdiff_t>(pool_size));
  std::vector<std::size_t> rest(idx.begin() + static_cast<std::ptrdiff_t>(pool_size),
                                idx.end());
  std::sort(pool.begin(), pool.end());
  std::sort(rest.begin(), rest.end());
  return {dataset.subset(rest), dataset.subset(pool)};
}

}  // namespace fedalign
