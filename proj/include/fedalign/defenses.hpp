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

#ifndef FEDALIGN_DEFENSES_HPP_
#define FEDALIGN_DEFENSES_HPP_

#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedalign/model.hpp"
#include "fedalign/rng.hpp"
#include "fedalign/update.hpp"

namespace fedalign {

enum class DefenseKind { kNone, kFoolsGold, kLocalDp };

// kFull follows the published FoolsGold re-weighting (pardoning, rescale to
// the max weight, logit squash). kMaxCosine is 1 - max pairwise cosine,
// clipped to [0, 1].
enum class FoolsGoldVariant { kFull, kMaxCosine };

DefenseKind parse_defense_kind(const std::string& name);
std::string to_string(DefenseKind kind);
FoolsGoldVariant parse_foolsgold_variant(const std::string& name);
std::string to_string(FoolsGoldVariant variant);

struct DefenseConfig {
  DefenseKind kind = DefenseKind::kNone;
  double dp_epsilon = 50.0;
  double dp_delta = 1e-5;
  // std::nullopt: median of this round's unclipped non-backdoor update norms.
  std::optional<double> clip_bound;
  // Rounds of history kept per client for FoolsGold; 0 keeps everything.
  int history_depth = 0;
  FoolsGoldVariant foolsgold_variant = FoolsGoldVariant::kFull;

  void validate() const;
};

// Per-client running sum of submitted updates (optionally windowed).
class GradientHistory {
 public:
  explicit GradientHistory(int depth = 0) : depth_(depth) {}

  void record(int client_id, const ParamVector& delta);
  bool contains(int client_id) const { return entries_.count(client_id) > 0; }
  // Sum of the retained updates for the client.
  const std::vector<double>& cumulative(int client_id) const;
  std::size_t num_clients() const { return entries_.size(); }

 private:
  struct Entry {
    std::vector<double> sum;
    std::deque<std::vector<double>> window;
  };
  int depth_;
  std::map<int, Entry> entries_;
};

// One weight in [0, 1] per participant (same order as `participants`).
// Zero-norm histories count as cosine 0 against everyone.
std::vector<double> foolsgold_weights(
    const GradientHistory& history, std::span<const int> participants,
    FoolsGoldVariant variant = FoolsGoldVariant::kFull);

// sqrt(2 ln(1.25 / delta)) / epsilon
double dp_sigma(double epsilon, double delta);

// Median L2 norm over the updates that will receive noise (non-backdoor).
// Returns 0 when there are none.
double median_clip_bound(std::span<const ClientUpdate> updates);

// Multiplicative clip: delta * min(1, bound / ||delta||). The result's norm
// never exceeds bound, even after rounding.
ParamVector clip_to_norm(const ParamVector& delta, double bound);

// Rescales delta to norm <= bound, then adds N(0, (sigma * bound)^2) to
// every coordinate. Backdoor-origin updates are returned untouched.
ClientUpdate dp_perturb(const ClientUpdate& update, double bound, double sigma,
                        Rng& rng);

}  // namespace fedalign

#endif  // FEDALIGN_DEFENSES_HPP_
