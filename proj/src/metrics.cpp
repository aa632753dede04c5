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

#include "fedalign/metrics.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>

#include "fedalign/data.hpp"
#include "fedalign/engine.hpp"
#include "fedalign/errors.hpp"

namespace fedalign {

void MetricSeries::add(int round, double value) {
  if (!points_.empty() && round <= points_.back().first) {
    throw UsageError("series '" + name_ + "': round " + std::to_string(round) +
                     " does not follow round " +
                     std::to_string(points_.back().first));
  }
  points_.emplace_back(round, value);
}

double MetricSeries::at(int round) const {
  for (const auto& [r, v] : points_) {
    if (r == round) return v;
  }
  throw UsageError("series '" + name_ + "' has no round " +
                   std::to_string(round));
}

double MetricSeries::mean_over(int first, int last) const {
  double sum = 0.0;
  int count = 0;
  for (const auto& [r, v] : points_) {
    if (r >= first && r <= last) {
      sum += v;
      ++count;
    }
  }
  if (count == 0) {
    throw UsageError("series '" + name_ + "' has no rounds in range");
  }
  return sum / count;
}

double main_accuracy(const NetworkArch& arch, const ParamVector& params,
                     const Dataset& test) {
  if (test.empty()) throw ConfigError("accuracy on an empty test set");
  const std::vector<int> pred = predict(arch, params, Batch::of(test));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == test.label(i)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

double backdoor_success(const NetworkArch& arch, const ParamVector& params,
                        const Dataset& test, const TriggerSpec& trigger) {
  if (test.empty()) throw ConfigError("backdoor success on an empty test set");
  const Dataset triggered = triggered_test_set(test, trigger);
  if (triggered.empty()) {
    throw UndefinedMetricError(
        "backdoor success undefined: every test row has the target label");
  }
  const std::vector<int> pred = predict(arch, params, Batch::of(triggered));
  std::size_t hits = 0;
  for (int y : pred) {
    if (y == trigger.target_label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(triggered.size());
}

WindowStats success_window_stats(const MetricSeries& series,
                                 int injection_round, int window) {
  if (window < 1) throw UsageError("window must be >= 1");
  WindowStats out;
  out.first_round = injection_round;
  out.last_round = injection_round + window - 1;
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(window));
  for (int r = out.first_round; r <= out.last_round; ++r) {
    bool found = false;
    for (const auto& [round, v] : series.points()) {
      if (round == r) {
        values.push_back(v);
        found = true;
        break;
      }
    }
    if (!found) {
      throw UsageError("success window truncated: series '" + series.name() +
                       "' lacks round " + std::to_string(r));
    }
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / window;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / window);
  return out;
}

namespace {

// sum_c coef[c] * grads[c], skipping zero coefficients.
ParamVector combine(const ParamVector& shape, std::span<const double> coef,
                    const std::vector<std::optional<ParamVector>>& grads) {
  ParamVector out = ParamVector::zeros(shape.arch());
  for (std::size_t c = 0; c < coef.size(); ++c) {
    if (coef[c] == 0.0) continue;
    out.add_scaled(*grads[c], coef[c]);
  }
  return out;
}

}  // namespace

BoundCheck divergence_bound_check(const NetworkArch& arch,
                                  const std::vector<Dataset>& clients,
                                  const ParamVector& start, int steps,
                                  double eta) {
  if (clients.empty()) throw ConfigError("bound check needs clients");
  if (steps < 0) throw ConfigError("bound check needs steps >= 0");
  const std::size_t C = static_cast<std::size_t>(arch.num_classes());

  Dataset all = clients.front().empty_like();
  std::size_t n = 0;
  for (const auto& d : clients) {
    if (d.empty()) throw ConfigError("bound check on an empty client");
    all.append(d);
    n += d.size();
  }
  const LabelDistribution p = label_distribution(all);
  const CentralizedTrace cen =
      centralized_train_traced(arch, all, start, steps, eta);
  const ParamVector& w_cen = cen.params.back();

  BoundCheck out;
  out.global.setting = "aggregate";
  std::vector<ClientUpdate> updates;
  // sum_k (n_k/n) sum_c p_k(c) [g_kc(w_k) - g_Dc(w_cen)] for each step.
  std::vector<ParamVector> global_terms(
      static_cast<std::size_t>(steps), ParamVector::zeros(arch));

  for (std::size_t k = 0; k < clients.size(); ++k) {
    const Dataset& dk = clients[k];
    const LabelDistribution pk = label_distribution(dk);
    const double weight =
        static_cast<double>(dk.size()) / static_cast<double>(n);
    BoundReport report;
    report.setting = "client " + std::to_string(k);
    double rhs_local = 0.0;

    std::vector<double> diff(C);
    for (std::size_t c = 0; c < C; ++c) diff[c] = p[c] - pk[c];

    ParamVector w = start;
    for (int tau = 0; tau < steps; ++tau) {
      const auto& g_cen = cen.class_grads[static_cast<std::size_t>(tau)];
      const auto g_k = per_class_gradients(arch, w, dk);

      ParamVector gradient_gap = ParamVector::zeros(arch);
      for (std::size_t c = 0; c < C; ++c) {
        if (pk[c] == 0.0) {
          if (tau == 0) ++report.skipped_terms;
          continue;
        }
        ParamVector gap = *g_k[c];
        gap -= *g_cen[c];
        gradient_gap.add_scaled(gap, pk[c]);
      }
      global_terms[static_cast<std::size_t>(tau)].add_scaled(gradient_gap,
                                                             weight);

      const double gap_norm = gradient_gap.norm();
      report.rhs += eta * (combine(start, diff, g_cen).norm() + gap_norm);
      const auto g_all_at_local = per_class_gradients(arch, w, all);
      rhs_local += eta * (combine(start, diff, g_all_at_local).norm() + gap_norm);

      w = sgd_step(w, gradient(arch, w, Batch::of(dk)), eta);
    }
    report.lhs = (w - w_cen).norm();
    out.global.skipped_terms += report.skipped_terms;
    out.per_client.push_back(report);
    out.per_client_rhs_local_iterate.push_back(rhs_local);
    updates.push_back(ClientUpdate{w - start, dk.size(), static_cast<int>(k),
                                   UpdateOrigin::kBenign, false});
  }

  for (const auto& term : global_terms) out.global.rhs += eta * term.norm();
  out.global.lhs = (aggregate(start, updates) - w_cen).norm();
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string series_to_csv(const MetricSeries& series) {
  std::string out = "round,value\n";
  for (const auto& [r, v] : series.points()) {
    out += std::to_string(r);
    out += ',';
    out += format_double(v);
    out += '\n';
  }
  return out;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp.string());
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    f.flush();
    if (!f) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot rename " + tmp.string() + " to " +
                             target.string() + ": " + ec.message());
  }
}

}  // namespace fedalign
