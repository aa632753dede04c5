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

#include "fedalign/aux_builder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "fedalign/errors.hpp"

namespace fedalign {

void AugmentationPolicy::validate() const {
  if (!(theta >= 0.0 && theta <= 1.0)) {
    throw ConfigError("augmentation.theta must be in [0, 1]");
  }
  if (!(max_growth >= 1.0)) {
    throw ConfigError("augmentation.max_growth must be >= 1");
  }
  if (min_batch == 0) throw ConfigError("augmentation.min_batch must be > 0");
  if (!(batch_fraction >= 0.0)) {
    throw ConfigError("augmentation.batch_fraction must be >= 0");
  }
  if (max_shift < 0 || max_rotation_deg < 0 || max_zoom < 0 || max_shear < 0 ||
      jitter_std < 0) {
    throw ConfigError("augmentation ranges must be non-negative");
  }
}

std::vector<double> apply_image_transform(std::span<const double> image,
                                          std::size_t height,
                                          std::size_t width,
                                          const ImageTransform& t) {
  if (image.size() != height * width) {
    throw ConfigError("image buffer does not match its shape");
  }
  const double cy = (static_cast<double>(height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(width) - 1.0) / 2.0;
  const double rad = t.rotation_deg * std::numbers::pi / 180.0;
  const double c = std::cos(rad);
  const double s = std::sin(rad);
  const double inv_zoom = 1.0 / t.zoom;
  auto pixel = [&](long y, long x) -> double {
    if (y < 0 || x < 0 || y >= static_cast<long>(height) ||
        x >= static_cast<long>(width)) {
      return 0.0;
    }
    return image[static_cast<std::size_t>(y) * width +
                 static_cast<std::size_t>(x)];
  };
  std::vector<double> out(image.size(), 0.0);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      // Inverse map: undo shift, zoom, shear, then rotation.
      double dx = (static_cast<double>(x) - cx - t.shift_x) * inv_zoom;
      const double dy = (static_cast<double>(y) - cy - t.shift_y) * inv_zoom;
      dx -= t.shear * dy;
      const double sx = c * dx + s * dy + cx;
      const double sy = -s * dx + c * dy + cy;
      const double fx = std::floor(sx);
      const double fy = std::floor(sy);
      const double ax = sx - fx;
      const double ay = sy - fy;
      const auto x0 = static_cast<long>(fx);
      const auto y0 = static_cast<long>(fy);
      double v = (1 - ay) * (1 - ax) * pixel(y0, x0);
      if (ax != 0.0) v += (1 - ay) * ax * pixel(y0, x0 + 1);
      if (ay != 0.0) {
        v += ay * (1 - ax) * pixel(y0 + 1, x0);
        if (ax != 0.0) v += ay * ax * pixel(y0 + 1, x0 + 1);
      }
      out[y * width + x] = v;
    }
  }
  return out;
}

Sample augment_sample(const Sample& sample, const AugmentationPolicy& policy,
                      Rng& rng, std::size_t image_height,
                      std::size_t image_width) {
  Sample out = sample;
  out.augmented = true;
  if (image_height > 0) {
    ImageTransform t;
    t.shift_x = rng.uniform(-policy.max_shift, policy.max_shift);
    t.shift_y = rng.uniform(-policy.max_shift, policy.max_shift);
    t.rotation_deg =
        rng.uniform(-policy.max_rotation_deg, policy.max_rotation_deg);
    t.zoom = 1.0 + rng.uniform(-policy.max_zoom, policy.max_zoom);
    t.shear = rng.uniform(-policy.max_shear, policy.max_shear);
    out.features = apply_image_transform(sample.features, image_height,
                                         image_width, t);
  } else if (policy.jitter_std > 0.0) {
    for (double& v : out.features) v += rng.normal(0.0, policy.jitter_std);
  }
  return out;
}

void AuxSpec::validate() const {
  if (target.size() == 0) throw ConfigError("aux target distribution missing");
  if (total_size < target.size()) {
    throw ConfigError("auxiliary size must be >= number of classes");
  }
}

Dataset build_auxiliary(const Dataset& local, const AuxSpec& spec,
                        const AugmentationPolicy& policy,
                        const Dataset* public_pool) {
  spec.validate();
  policy.validate();
  if (static_cast<int>(spec.target.size()) != local.num_classes()) {
    throw ConfigError("aux target has the wrong number of classes");
  }
  const auto quota = apportion(spec.total_size, spec.target.probs());
  const Rng root(spec.seed);
  Dataset out = local.empty_like();
  out.reserve(spec.total_size);
  for (int c = 0; c < local.num_classes(); ++c) {
    const std::size_t need = quota[static_cast<std::size_t>(c)];
    if (need == 0) continue;
    Rng rng = root.fork("class", static_cast<std::uint64_t>(c));
    const auto own = local.indices_of_class(c);
    if (own.size() >= need) {
      auto pick = sample_without_replacement(rng, static_cast<int>(own.size()),
                                             static_cast<int>(need));
      std::sort(pick.begin(), pick.end());
      for (int i : pick) out.add(local.sample(own[static_cast<std::size_t>(i)]));
      continue;
    }
    std::vector<Sample> bases;
    for (std::size_t i : own) {
      bases.push_back(local.sample(i));
      out.add(bases.back());
    }
    if (public_pool) {
      auto pooled = public_pool->indices_of_class(c);
      rng.shuffle(pooled);
      for (std::size_t i : pooled) {
        bases.push_back(public_pool->sample(i));
        if (bases.size() <= need) {
          out.add(bases.back());
        }
      }
    }
    if (bases.empty()) {
      throw ConstructionError("class " + std::to_string(c) +
                                  " is needed in the auxiliary dataset but has "
                                  "no local or public samples to augment",
                              c);
    }
    const std::size_t have = std::min(bases.size(), need);
    for (std::size_t k = have; k < need; ++k) {
      const auto& base = bases[static_cast<std::size_t>(
          rng.uniform_index(bases.size()))];
      out.add(augment_sample(base, policy, rng, local.image_height(),
                             local.image_width()));
    }
  }
  std::vector<std::size_t> order(out.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng = root.fork("shuffle");
  shuffle_rng.shuffle(order);
  return out.subset(order);
}

}  // namespace fedalign
