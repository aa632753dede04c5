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

#ifndef FEDALIGN_AUX_BUILDER_HPP_
#define FEDALIGN_AUX_BUILDER_HPP_

#include <cstddef>
#include <cstdint>

#include "fedalign/data.hpp"
#include "fedalign/dataset.hpp"
#include "fedalign/rng.hpp"

namespace fedalign {

// How the attacker synthesizes extra samples, and when the gradient-aligned
// augmentation stops. Image rows get random shift/rotation/zoom/shear;
// plain feature vectors get Gaussian jitter.
struct AugmentationPolicy {
  // Stop once cos(new batch gradient, running estimate) >= theta.
  double theta = 0.8;
  double max_shift = 2.0;          // pixels
  double max_rotation_deg = 15.0;  // degrees
  double max_zoom = 0.1;           // relative
  double max_shear = 0.1;          // x += shear * y
  double jitter_std = 0.1;         // feature units
  // A class may grow to at most max_growth times its starting size.
  double max_growth = 4.0;
  // Each augmentation batch has max(min_batch, batch_fraction * size) rows.
  std::size_t min_batch = 8;
  double batch_fraction = 0.5;

  void validate() const;
};

// Affine image transform about the image center, sampled bilinearly with
// zero fill outside the frame.
struct ImageTransform {
  double shift_x = 0.0;
  double shift_y = 0.0;
  double rotation_deg = 0.0;
  double zoom = 1.0;
  double shear = 0.0;
};

std::vector<double> apply_image_transform(std::span<const double> image,
                                          std::size_t height,
                                          std::size_t width,
                                          const ImageTransform& t);

// Random label-preserving variant of `sample`. `image_height`/`width` are
// zero for non-image rows. The result is tagged augmented.
Sample augment_sample(const Sample& sample, const AugmentationPolicy& policy,
                      Rng& rng, std::size_t image_height = 0,
                      std::size_t image_width = 0);

struct AuxSpec {
  std::size_t total_size = 0;
  LabelDistribution target;
  std::uint64_t seed = 0;

  void validate() const;
};

// Resamples `local` so that class c has exactly apportion(M, target)[c]
// rows: surplus classes are downsampled without replacement, short classes
// keep every original and are topped up with public-pool rows and then
// augmented copies. Output is shuffled. Throws ConstructionError when a class
// is needed but neither local nor pool rows exist.
Dataset build_auxiliary(const Dataset& local, const AuxSpec& spec,
                        const AugmentationPolicy& policy,
                        const Dataset* public_pool = nullptr);

}  // namespace fedalign

#endif  // FEDALIGN_AUX_BUILDER_HPP_
