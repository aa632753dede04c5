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

#include "fedalign/defenses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fedalign/errors.hpp"

namespace fedalign {

std::string to_string(UpdateOrigin origin) {
  switch (origin) {
    case UpdateOrigin::kBenign:
      return "benign";
    case UpdateOrigin::kAligned:
      return "aligned";
    case UpdateOrigin::kBackdoor:
      return "backdoor";
  }
  return "?";
}

DefenseKind parse_defense_kind(const std::string& name) {
  if (name == "none") return DefenseKind::kNone;
  if (name == "foolsgold") return DefenseKind::kFoolsGold;
  if (name == "local_dp") return DefenseKind::kLocalDp;
  throw ConfigError("unknown defense kind '" + name + "'");
}

std::string to_string(DefenseKind kind) {
  switch (kind) {
    case DefenseKind::kNone:
      return "none";
    case DefenseKind::kFoolsGold:
      return "foolsgold";
    case DefenseKind::kLocalDp:
      return "local_dp";
  }
  return "?";
}

FoolsGoldVariant parse_foolsgold_variant(const std::string& name) {
  if (name == "full") return FoolsGoldVariant::kFull;
  if (name == "max_cosine") return FoolsGoldVariant::kMaxCosine;
  throw ConfigError("unknown FoolsGold variant '" + name + "'");
}

std::string to_string(FoolsGoldVariant variant) {
  return variant == FoolsGoldVariant::kFull ? "full" : "max_cosine";
}

void DefenseConfig::validate() const {
  if (!(dp_epsilon > 0.0)) throw ConfigError("defense.dp_epsilon must be > 0");
  if (!(dp_delta > 0.0 && dp_delta < 1.0)) {
    throw ConfigError("defense.dp_delta must be in (0, 1)");
  }
  if (clip_bound && !(*clip_bound > 0.0)) {
    throw ConfigError("defense.clip_bound must be > 0");
  }
  if (history_depth < 0) throw ConfigError("defense.history_depth must be >= 0");
}

void GradientHistory::record(int client_id, const ParamVector& delta) {
  Entry& e = entries_[client_id];
  const auto v = delta.values();
  if (e.sum.empty()) e.sum.assign(v.size(), 0.0);
  if (e.sum.size() != v.size()) {
    throw ConfigError("update size changed within gradient history");
  }
  for (std::size_t i = 0; i < v.size(); ++i) e.sum[i] += v[i];
  if (depth_ > 0) {
    e.window.emplace_back(v.begin(), v.end());
    if (static_cast<int>(e.window.size()) > depth_) {
      const auto& old = e.window.front();
      for (std::size_t i = 0; i < old.size(); ++i) e.sum[i] -= old[i];
      e.window.pop_front();
    }
  }
}

const std::vector<double>& GradientHistory::cumulative(int client_id) const {
  auto it = entries_.find(client_id);
  if (it == entries_.end()) {
    throw UsageError("no gradient history for client " +
                     std::to_string(client_id));
  }
  return it->second.sum;
}

std::vector<double> foolsgold_weights(const GradientHistory& history,
                                      std::span<const int> participants,
                                      FoolsGoldVariant variant) {
  const std::size_t n = participants.size();
  std::vector<const std::vector<double>*> hist(n);
  for (std::size_t i = 0; i < n; ++i) {
    hist[i] = &history.cumulative(participants[i]);
  }
  // Pairwise cosine with the self-similarity removed (diagonal = 0).
  std::vector<double> cs(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double c = cosine_similarity(*hist[i], *hist[j]);
      cs[i * n + j] = c;
      cs[j * n + i] = c;
    }
  }
  auto row_max = [&](std::size_t i) {
    double m = cs[i * n];
    for (std::size_t j = 1; j < n; ++j) m = std::max(m, cs[i * n + j]);
    return m;
  };

  std::vector<double> wv(n);
  if (variant == FoolsGoldVariant::kMaxCosine) {
    for (std::size_t i = 0; i < n; ++i) {
      wv[i] = std::clamp(1.0 - row_max(i), 0.0, 1.0);
    }
    return wv;
  }

  std::vector<double> maxcs(n);
  for (std::size_t i = 0; i < n; ++i) maxcs[i] = row_max(i);
  // Pardoning: honest clients that look similar to a sybil get their
  // similarity scaled down by the ratio of max similarities.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (maxcs[i] < maxcs[j]) cs[i * n + j] *= maxcs[i] / maxcs[j];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    wv[i] = std::clamp(1.0 - row_max(i), 0.0, 1.0);
  }
  const double top = *std::max_element(wv.begin(), wv.end());
  if (!(top > 0.0)) return std::vector<double>(n, 0.0);
  for (double& w : wv) {
    w /= top;
    if (w == 1.0) w = 0.99;
    if (w == 0.0) continue;
    w = std::log(w / (1.0 - w)) + 0.5;
    w = std::clamp(w, 0.0, 1.0);
  }
  return wv;
}

double dp_sigma(double epsilon, double delta) {
  if (!(epsilon > 0.0) || !(delta > 0.0)) {
    throw ConfigError("dp_sigma needs epsilon > 0 and delta > 0");
  }
  const double inner = 2.0 * std::log(1.25 / delta);
  return inner <= 0.0 ? 0.0 : std::sqrt(inner) / epsilon;
}

double median_clip_bound(std::span<const ClientUpdate> updates) {
  std::vector<double> norms;
  for (const auto& u : updates) {
    if (u.origin != UpdateOrigin::kBackdoor) norms.push_back(u.delta.norm());
  }
  if (norms.empty()) return 0.0;
  std::sort(norms.begin(), norms.end());
  const std::size_t mid = norms.size() / 2;
  if (norms.size() % 2 == 1) return norms[mid];
  return 0.5 * (norms[mid - 1] + norms[mid]);
}

ParamVector clip_to_norm(const ParamVector& delta, double bound) {
  if (!(bound > 0.0)) throw ConfigError("clip bound must be > 0");
  const double norm = delta.norm();
  if (norm <= bound) return delta;
  double scale = bound / norm;
  ParamVector out = delta * scale;
  while (out.norm() > bound) {
    scale = std::nextafter(scale, 0.0);
    out = delta * scale;
  }
  return out;
}

ClientUpdate dp_perturb(const ClientUpdate& update, double bound, double sigma,
                        Rng& rng) {
  if (update.origin == UpdateOrigin::kBackdoor) return update;
  if (!(sigma >= 0.0)) throw ConfigError("dp sigma must be >= 0");
  ClientUpdate out = update;
  out.delta = clip_to_norm(update.delta, bound);
  const double stddev = sigma * bound;
  if (stddev > 0.0) {
    for (double& v : out.delta.values()) v += rng.normal(0.0, stddev);
  }
  out.noise_applied = true;
  return out;
}

}  // namespace fedalign
