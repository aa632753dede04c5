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

#ifndef FEDALIGN_MODEL_HPP_
#define FEDALIGN_MODEL_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedalign/dataset.hpp"
#include "fedalign/rng.hpp"

namespace fedalign {

enum class Activation { kTanh, kRelu, kSigmoid };

Activation parse_activation(const std::string& name);
std::string to_string(Activation activation);

// Dense feedforward classifier: layer_sizes = {input, hidden..., classes}.
// Hidden layers use `activation`; the output layer is softmax.
struct NetworkArch {
  std::vector<std::size_t> layer_sizes;
  Activation activation = Activation::kTanh;

  std::size_t input_dim() const { return layer_sizes.front(); }
  int num_classes() const { return static_cast<int>(layer_sizes.back()); }
  std::size_t num_layers() const { return layer_sizes.size() - 1; }
  std::size_t param_count() const;
  // Offset of layer l's weight block (out x in, row-major); the bias block
  // of size out follows immediately.
  std::size_t weight_offset(std::size_t layer) const;

  // Throws ConfigError unless there are >= 2 sizes, all positive, with >= 2
  // output classes.
  void validate() const;

  bool operator==(const NetworkArch&) const = default;
};

// Flat parameter (or update) vector tagged with the architecture it belongs
// to. Arithmetic requires identical architectures.
class ParamVector {
 public:
  ParamVector() = default;
  // Throws ConfigError if values.size() != arch.param_count().
  ParamVector(NetworkArch arch, std::vector<double> values);

  static ParamVector zeros(const NetworkArch& arch);

  const NetworkArch& arch() const { return arch_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  bool same_shape(const ParamVector& other) const {
    return arch_ == other.arch_;
  }
  bool all_finite() const;

  double norm() const;
  double dot(const ParamVector& other) const;

  ParamVector& operator+=(const ParamVector& other);
  ParamVector& operator-=(const ParamVector& other);
  ParamVector& operator*=(double scale);
  // this += scale * other
  ParamVector& add_scaled(const ParamVector& other, double scale);

  friend ParamVector operator+(ParamVector a, const ParamVector& b) {
    return a += b;
  }
  friend ParamVector operator-(ParamVector a, const ParamVector& b) {
    return a -= b;
  }
  friend ParamVector operator*(ParamVector a, double s) { return a *= s; }
  friend ParamVector operator*(double s, ParamVector a) { return a *= s; }

  bool operator==(const ParamVector&) const = default;

 private:
  void require_same_shape(const ParamVector& other) const;

  NetworkArch arch_;
  std::vector<double> values_;
};

double max_abs_diff(const ParamVector& a, const ParamVector& b);
// Cosine similarity; 0 if either vector has zero norm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Row-major dense matrix, used for class-probability outputs.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data).subspan(r * cols, cols);
  }
};

// Non-owning view of samples fed to the model.
struct Batch {
  std::span<const double> features;  // rows x input_dim, row-major
  std::span<const int> labels;
  std::size_t feature_dim = 0;

  static Batch of(const Dataset& d) {
    return Batch{d.features(), d.labels(), d.feature_dim()};
  }
  std::size_t size() const { return labels.size(); }
};

// Probabilities are clamped to this floor inside the log.
inline constexpr double kLogFloor = 1e-12;

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
ParamVector init_params(const NetworkArch& arch, Rng& rng);

Matrix forward(const NetworkArch& arch, const ParamVector& params,
               const Batch& batch);
std::vector<int> predict(const NetworkArch& arch, const ParamVector& params,
                         const Batch& batch);

// Mean cross-entropy of the true class.
double loss(const NetworkArch& arch, const ParamVector& params,
            const Batch& batch);

// Gradient of loss() with respect to every parameter.
ParamVector gradient(const NetworkArch& arch, const ParamVector& params,
                     const Batch& batch);

// Gradient of the mean cross-entropy restricted to class-`label` samples.
// Throws EmptyClassError when the dataset has no such sample.
ParamVector per_class_gradient(const NetworkArch& arch,
                               const ParamVector& params,
                               const Dataset& dataset, int label);

// All classes at once; absent classes are std::nullopt.
std::vector<std::optional<ParamVector>> per_class_gradients(
    const NetworkArch& arch, const ParamVector& params, const Dataset& dataset);

// params - eta * grad. Throws NumericError on non-finite gradient entries and
// ConfigError on shape mismatch or negative eta.
ParamVector sgd_step(const ParamVector& params, const ParamVector& grad,
                     double eta);

}  // namespace fedalign

#endif  // FEDALIGN_MODEL_HPP_
