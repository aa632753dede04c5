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

#ifndef FEDALIGN_DATASET_HPP_
#define FEDALIGN_DATASET_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fedalign {

// One labeled example, detached from any dataset.
struct Sample {
  std::vector<double> features;
  int label = 0;
  bool augmented = false;
};

// Labeled samples stored as a dense row-major feature matrix. Used for whole
// populations, client shards, auxiliary sets and test sets alike.
//
// image_height/image_width are nonzero when rows are row-major grayscale
// images; geometric augmentations and the block trigger need them.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t feature_dim, int num_classes);

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  std::size_t feature_dim() const { return feature_dim_; }
  int num_classes() const { return num_classes_; }

  int owner_id() const { return owner_id_; }
  void set_owner_id(int id) { owner_id_ = id; }

  std::size_t image_height() const { return image_height_; }
  std::size_t image_width() const { return image_width_; }
  bool is_image() const { return image_height_ > 0; }
  // Throws ConfigError unless height * width == feature_dim.
  void set_image_shape(std::size_t height, std::size_t width);

  std::span<const double> features() const { return features_; }
  std::span<const int> labels() const { return labels_; }
  std::span<const double> row(std::size_t i) const;
  int label(std::size_t i) const { return labels_[i]; }
  bool augmented(std::size_t i) const { return augmented_[i] != 0; }

  // Throws ConfigError on dimension or label-range mismatch.
  void add(std::span<const double> features, int label, bool augmented = false);
  void add(const Sample& sample);
  Sample sample(std::size_t i) const;
  void reserve(std::size_t n);

  // Rows selected by index, in the given order; metadata is preserved.
  Dataset subset(std::span<const std::size_t> indices) const;
  // Same metadata, no rows.
  Dataset empty_like() const;
  void append(const Dataset& other);

  std::vector<std::size_t> class_counts() const;
  std::vector<std::size_t> indices_of_class(int label) const;
  std::size_t augmented_count() const;

  // Largest feature value over all rows (0 for an empty dataset).
  double max_feature_value() const;

 private:
  std::size_t feature_dim_ = 0;
  int num_classes_ = 0;
  int owner_id_ = -1;
  std::size_t image_height_ = 0;
  std::size_t image_width_ = 0;
  std::vector<double> features_;
  std::vector<int> labels_;
  std::vector<std::uint8_t> augmented_;
};

using ClientDataset = Dataset;

}  // namespace fedalign

#endif  // FEDALIGN_DATASET_HPP_
