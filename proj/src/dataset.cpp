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

#include "fedalign/dataset.hpp"

#include <algorithm>
#include <string>

#include "fedalign/errors.hpp"

namespace fedalign {

Dataset::Dataset(std::size_t feature_dim, int num_classes)
    : feature_dim_(feature_dim), num_classes_(num_classes) {
  if (feature_dim == 0) throw ConfigError("dataset feature_dim must be > 0");
  if (num_classes < 2) throw ConfigError("dataset needs at least 2 classes");
}

void Dataset::set_image_shape(std::size_t height, std::size_t width) {
  if (height * width != feature_dim_) {
    throw ConfigError("image shape " + std::to_string(height) + "x" +
                      std::to_string(width) + " does not match feature_dim " +
                      std::to_string(feature_dim_));
  }
  image_height_ = height;
  image_width_ = width;
}

std::span<const double> Dataset::row(std::size_t i) const {
  return std::span<const double>(features_).subspan(i * feature_dim_,
                                                    feature_dim_);
}

void Dataset::add(std::span<const double> features, int label,
                  bool augmented) {
  if (features.size() != feature_dim_) {
    throw ConfigError("sample has " + std::to_string(features.size()) +
                      " features, dataset expects " +
                      std::to_string(feature_dim_));
  }
  if (label < 0 || label >= num_classes_) {
    throw ConfigError("label " + std::to_string(label) + " out of range");
  }
  features_.insert(features_.end(), features.begin(), features.end());
  labels_.push_back(label);
  augmented_.push_back(augmented ? 1 : 0);
}

void Dataset::add(const Sample& sample) {
  add(sample.features, sample.label, sample.augmented);
}

Sample Dataset::sample(std::size_t i) const {
  auto r = row(i);
  return Sample{{r.begin(), r.end()}, labels_[i], augmented_[i] != 0};
}

void Dataset::reserve(std::size_t n) {
  features_.reserve(n * feature_dim_);
  labels_.reserve(n);
  augmented_.reserve(n);
}

Dataset Dataset::empty_like() const {
  Dataset out;
  out.feature_dim_ = feature_dim_;
  out.num_classes_ = num_classes_;
  out.owner_id_ = owner_id_;
  out.image_height_ = image_height_;
  out.image_width_ = image_width_;
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out = empty_like();
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    auto r = row(i);
    out.features_.insert(out.features_.end(), r.begin(), r.end());
    out.labels_.push_back(labels_[i]);
    out.augmented_.push_back(augmented_[i]);
  }
  return out;
}

void Dataset::append(const Dataset& other) {
  if (other.feature_dim_ != feature_dim_ ||
      other.num_classes_ != num_classes_) {
    throw ConfigError("cannot append datasets of different layout");
  }
  features_.insert(features_.end(), other.features_.begin(),
                   other.features_.end());
  labels_.insert(labels_.end(), other.labels_.begin(), other.labels_.end());
  augmented_.insert(augmented_.end(), other.augmented_.begin(),
                    other.augmented_.end());
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes_), 0);
  for (int y : labels_) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

std::vector<std::size_t> Dataset::indices_of_class(int label) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) out.push_back(i);
  }
  return out;
}

std::size_t Dataset::augmented_count() const {
  return static_cast<std::size_t>(
      std::count(augmented_.begin(), augmented_.end(), 1));
}

double Dataset::max_feature_value() const {
  if (features_.empty()) return 0.0;
  return *std::max_element(features_.begin(), features_.end());
}

}  // namespace fedalign
