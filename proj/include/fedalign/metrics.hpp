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

#ifndef FEDALIGN_METRICS_HPP_
#define FEDALIGN_METRICS_HPP_

#include <string>
#include <utility>
#include <vector>

#include "fedalign/backdoor.hpp"
#include "fedalign/dataset.hpp"
#include "fedalign/model.hpp"

namespace fedalign {

// Named (round, value) pairs with strictly increasing rounds.
class MetricSeries {
 public:
  MetricSeries() = default;
  explicit MetricSeries(std::string name) : name_(std::move(name)) {}

  const std::string& name() const { return name_; }
  // Throws UsageError unless round exceeds the last recorded round.
  void add(int round, double value);
  const std::vector<std::pair<int, double>>& points() const { return points_; }
  bool empty() const { return points_.empty(); }
  std::size_t size() const { return points_.size(); }
  // Throws UsageError if the round was not recorded.
  double at(int round) const;
  // Mean of the values recorded for rounds in [first, last].
  double mean_over(int first, int last) const;

 private:
  std::string name_;
  std::vector<std::pair<int, double>> points_;
};

// Fraction of argmax-correct predictions. Throws ConfigError on an empty set.
double main_accuracy(const NetworkArch& arch, const ParamVector& params,
                     const Dataset& test);

// Fraction of triggered non-target test rows classified as the target
// label. Throws UndefinedMetricError when every row has the target label.
double backdoor_success(const NetworkArch& arch, const ParamVector& params,
                        const Dataset& test, const TriggerSpec& trigger);

struct WindowStats {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  int first_round = 0;
  int last_round = 0;
};

// Statistics over rounds injection .. injection + window - 1, i.e. the global
// models produced by the injection round and the rounds after it. Throws
// UsageError if any of those rounds is missing.
WindowStats success_window_stats(const MetricSeries& series,
                                 int injection_round, int window = 10);

// Divergence bounds within one aggregation. All clients start from `start`,
// run `steps` full-batch gradient steps at rate eta, and are averaged with
// weights n_k / n; the centralized twin trains on the union of their data.
struct BoundReport {
  double lhs = 0.0;
  double rhs = 0.0;
  // Per-class terms dropped because the class is absent from the data they
  // refer to (their weight p_k(c) or p(c) is zero).
  int skipped_terms = 0;
  std::string setting;

  bool holds(double tol = 0.0) const { return lhs <= rhs + tol; }
};

struct BoundCheck {
  // ||w^{T,t} - w_cen^{T,t}|| for the aggregated model.
  BoundReport global;
  // ||w_k^{T,t} - w_cen^{T,t}|| for each client, in input order.
  std::vector<BoundReport> per_client;
  // The per-client bound with the gradient-distance term taken at the
  // client's own iterate rather than the centralized one. Not a valid bound
  // in general; kept for comparison.
  std::vector<double> per_client_rhs_local_iterate;
};

BoundCheck divergence_bound_check(const NetworkArch& arch,
                                  const std::vector<Dataset>& clients,
                                  const ParamVector& start, int steps,
                                  double eta);

// CSV with header "round,value" and values printed to full precision.
std::string series_to_csv(const MetricSeries& series);

// Writes `content` to `path` via a temporary file in the same directory and
// a rename. Throws std::runtime_error on I/O failure.
void write_file_atomic(const std::string& path, const std::string& content);

// Shortest round-trip decimal representation used in every output file.
std::string format_double(double v);

}  // namespace fedalign

#endif  // FEDALIGN_METRICS_HPP_
