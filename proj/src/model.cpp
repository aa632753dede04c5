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

#include "fedalign/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedalign/errors.hpp"

namespace fedalign {
namespace {

double activate(Activation act, double z) {
  switch (act) {
    case Activation::kTanh:
      return std::tanh(z);
    case Activation::kRelu:
      return z > 0.0 ? z : 0.0;
    case Activation::kSigmoid:
      return 1.0 / (1.0 + std::exp(-z));
  }
  return z;
}

// Derivative expressed through the activation output a = act(z).
double activate_grad(Activation act, double a) {
  switch (act) {
    case Activation::kTanh:
      return 1.0 - a * a;
    case Activation::kRelu:
      return a > 0.0 ? 1.0 : 0.0;
    case Activation::kSigmoid:
      return a * (1.0 - a);
  }
  return 1.0;
}

void check_inputs(const NetworkArch& arch, const ParamVector& params,
                  const Batch& batch) {
  arch.validate();
  if (params.arch() != arch || params.size() != arch.param_count()) {
    throw ConfigError("parameter vector does not match network architecture");
  }
  if (batch.feature_dim != arch.input_dim()) {
    throw ConfigError("batch feature dim " + std::to_string(batch.feature_dim) +
                      " != network input dim " +
                      std::to_string(arch.input_dim()));
  }
  if (batch.labels.empty()) throw ConfigError("batch is empty");
  if (batch.features.size() != batch.labels.size() * batch.feature_dim) {
    throw ConfigError("batch feature/label row counts differ");
  }
  for (int y : batch.labels) {
    if (y < 0 || y >= arch.num_classes()) {
      throw ConfigError("label " + std::to_string(y) + " out of range");
    }
  }
}

// Layer outputs for a batch: acts[0] is the input, acts[L] the softmax.
struct ForwardTrace {
  std::vector<std::vector<double>> acts;
};

ForwardTrace run_forward(const NetworkArch& arch, const ParamVector& params,
                         const Batch& batch) {
  const std::size_t n = batch.size();
  const std::size_t num_layers = arch.num_layers();
  const auto p = params.values();
  ForwardTrace trace;
  trace.acts.reserve(num_layers + 1);
  trace.acts.emplace_back(batch.features.begin(), batch.features.end());
  for (std::size_t l = 0; l < num_layers; ++l) {
    const std::size_t in = arch.layer_sizes[l];
    const std::size_t out = arch.layer_sizes[l + 1];
    const double* w = p.data() + arch.weight_offset(l);
    const double* b = w + in * out;
    const std::vector<double>& prev = trace.acts.back();
    std::vector<double> z(n * out);
    for (std::size_t s = 0; s < n; ++s) {
      const double* a = prev.data() + s * in;
      for (std::size_t o = 0; o < out; ++o) {
        const double* wo = w + o * in;
        double acc = b[o];
        for (std::size_t i = 0; i < in; ++i) acc += a[i] * wo[i];
        z[s * out + o] = acc;
      }
    }
    if (l + 1 < num_layers) {
      for (double& v : z) v = activate(arch.activation, v);
    } else {
      for (std::size_t s = 0; s < n; ++s) {
        double* row = z.data() + s * out;
        const double mx = *std::max_element(row, row + out);
        double total = 0.0;
        for (std::size_t o = 0; o < out; ++o) {
          row[o] = std::exp(row[o] - mx);
          total += row[o];
        }
        for (std::size_t o = 0; o < out; ++o) row[o] /= total;
      }
    }
    trace.acts.push_back(std::move(z));
  }
  return trace;
}

}  // namespace

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw ConfigError("unknown activation '" + name + "'");
}

std::string to_string(Activation activation) {
  switch (activation) {
    case Activation::kTanh:
      return "tanh";
    case Activation::kRelu:
      return "relu";
    case Activation::kSigmoid:
      return "sigmoid";
  }
  return "?";
}

std::size_t NetworkArch::param_count() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    total += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
  }
  return total;
}

std::size_t NetworkArch::weight_offset(std::size_t layer) const {
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layer; ++l) {
    offset += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
  }
  return offset;
}

void NetworkArch::validate() const {
  if (layer_sizes.size() < 2) {
    throw ConfigError("network needs at least an input and an output layer");
  }
  for (std::size_t s : layer_sizes) {
    if (s == 0) throw ConfigError("layer sizes must be positive");
  }
  if (layer_sizes.back() < 2) {
    throw ConfigError("network needs at least 2 output classes");
  }
}

ParamVector::ParamVector(NetworkArch arch, std::vector<double> values)
    : arch_(std::move(arch)), values_(std::move(values)) {
  arch_.validate();
  if (values_.size() != arch_.param_count()) {
    throw ConfigError("parameter vector has " + std::to_string(values_.size()) +
                      " entries, architecture needs " +
                      std::to_string(arch_.param_count()));
  }
}

ParamVector ParamVector::zeros(const NetworkArch& arch) {
  return ParamVector(arch, std::vector<double>(arch.param_count(), 0.0));
}

bool ParamVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

double ParamVector::norm() const { return std::sqrt(dot(*this)); }

double ParamVector::dot(const ParamVector& other) const {
  require_same_shape(other);
  double acc = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    acc += values_[i] * other.values_[i];
  }
  return acc;
}

void ParamVector::require_same_shape(const ParamVector& other) const {
  if (!same_shape(other) || values_.size() != other.values_.size()) {
    throw ConfigError("parameter vectors have different shapes");
  }
}

ParamVector& ParamVector::operator+=(const ParamVector& other) {
  return add_scaled(other, 1.0);
}

ParamVector& ParamVector::operator-=(const ParamVector& other) {
  require_same_shape(other);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other[i];
  return *this;
}

ParamVector& ParamVector::operator*=(double scale) {
  for (double& v : values_) v *= scale;
  return *this;
}

ParamVector& ParamVector::add_scaled(const ParamVector& other, double scale) {
  require_same_shape(other);
  for (std::size_t i = 0; i < values_.size(); ++i) {
    values_[i] += scale * other[i];
  }
  return *this;
}

double max_abs_diff(const ParamVector& a, const ParamVector& b) {
  if (!a.same_shape(b)) throw ConfigError("parameter vectors differ in shape");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]));
  }
  return worst;
}

double cosine_similarity(std::span<const double> a,
                         std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("cosine of unequal lengths");
  double ab = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

ParamVector init_params(const NetworkArch& arch, Rng& rng) {
  arch.validate();
  std::vector<double> values(arch.param_count());
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    const std::size_t in = arch.layer_sizes[l];
    const std::size_t out = arch.layer_sizes[l + 1];
    const double r = 1.0 / std::sqrt(static_cast<double>(in));
    const std::size_t offset = arch.weight_offset(l);
    for (std::size_t i = 0; i < in * out + out; ++i) {
      values[offset + i] = rng.uniform(-r, r);
    }
  }
  return ParamVector(arch, std::move(values));
}

Matrix forward(const NetworkArch& arch, const ParamVector& params,
               const Batch& batch) {
  check_inputs(arch, params, batch);
  ForwardTrace trace = run_forward(arch, params, batch);
  return Matrix{batch.size(), arch.layer_sizes.back(),
                std::move(trace.acts.back())};
}

std::vector<int> predict(const NetworkArch& arch, const ParamVector& params,
                         const Batch& batch) {
  const Matrix probs = forward(arch, params, batch);
  std::vector<int> out(probs.rows);
  for (std::size_t s = 0; s < probs.rows; ++s) {
    auto r = probs.row(s);
    out[s] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

double loss(const NetworkArch& arch, const ParamVector& params,
            const Batch& batch) {
  const Matrix probs = forward(arch, params, batch);
  double total = 0.0;
  for (std::size_t s = 0; s < probs.rows; ++s) {
    const double p = probs(s, static_cast<std::size_t>(batch.labels[s]));
    total += -std::log(std::clamp(p, kLogFloor, 1.0));
  }
  return total / static_cast<double>(probs.rows);
}

ParamVector gradient(const NetworkArch& arch, const ParamVector& params,
                     const Batch& batch) {
  check_inputs(arch, params, batch);
  const std::size_t n = batch.size();
  const std::size_t num_layers = arch.num_layers();
  ForwardTrace trace = run_forward(arch, params, batch);

  const auto p = params.values();
  std::vector<double> grad(arch.param_count(), 0.0);

  // delta of the softmax cross-entropy w.r.t. logits, already averaged.
  const std::size_t classes = arch.layer_sizes.back();
  std::vector<double> delta = std::move(trace.acts.back());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t s = 0; s < n; ++s) {
    delta[s * classes + static_cast<std::size_t>(batch.labels[s])] -= 1.0;
  }
  for (double& d : delta) d *= inv_n;

  for (std::size_t l = num_layers; l-- > 0;) {
    const std::size_t in = arch.layer_sizes[l];
    const std::size_t out = arch.layer_sizes[l + 1];
    const std::size_t offset = arch.weight_offset(l);
    const double* w = p.data() + offset;
    double* gw = grad.data() + offset;
    double* gb = gw + in * out;
    const std::vector<double>& a_prev = trace.acts[l];
    for (std::size_t s = 0; s < n; ++s) {
      const double* a = a_prev.data() + s * in;
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta[s * out + o];
        gb[o] += d;
        double* gwo = gw + o * in;
        for (std::size_t i = 0; i < in; ++i) gwo[i] += d * a[i];
      }
    }
    if (l == 0) break;
    std::vector<double> prev_delta(n * in, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
      double* pd = prev_delta.data() + s * in;
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta[s * out + o];
        const double* wo = w + o * in;
        for (std::size_t i = 0; i < in; ++i) pd[i] += d * wo[i];
      }
      const double* a = a_prev.data() + s * in;
      for (std::size_t i = 0; i < in; ++i) {
        pd[i] *= activate_grad(arch.activation, a[i]);
      }
    }
    delta = std::move(prev_delta);
  }
  return ParamVector(arch, std::move(grad));
}

ParamVector per_class_gradient(const NetworkArch& arch,
                               const ParamVector& params,
                               const Dataset& dataset, int label) {
  const auto idx = dataset.indices_of_class(label);
  if (idx.empty()) throw EmptyClassError(label);
  const Dataset only = dataset.subset(idx);
  return gradient(arch, params, Batch::of(only));
}

std::vector<std::optional<ParamVector>> per_class_gradients(
    const NetworkArch& arch, const ParamVector& params,
    const Dataset& dataset) {
  std::vector<std::optional<ParamVector>> out(
      static_cast<std::size_t>(arch.num_classes()));
  for (int c = 0; c < arch.num_classes(); ++c) {
    const auto idx = dataset.indices_of_class(c);
    if (idx.empty()) continue;
    const Dataset only = dataset.subset(idx);
    out[static_cast<std::size_t>(c)] = gradient(arch, params, Batch::of(only));
  }
  return out;
}

ParamVector sgd_step(const ParamVector& params, const ParamVector& grad,
                     double eta) {
  if (!(eta >= 0.0) || !std::isfinite(eta)) {
    throw ConfigError("learning rate must be finite and non-negative");
  }
  if (!params.same_shape(grad)) {
    throw ConfigError("gradient shape does not match parameters");
  }
  if (!grad.all_finite()) throw NumericError("non-finite gradient entry");
  ParamVector out = params;
  out.add_scaled(grad, -eta);
  return out;
}

}  // namespace fedalign
