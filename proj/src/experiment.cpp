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

#include "fedalign/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "fedalign/errors.hpp"
#include "fedalign/rng.hpp"

namespace fedalign {

namespace {

const char* const kBasePreset = R"({
  "seed": 1,
  "output_dir": "results",
  "jobs": 1,
  "dataset": {
    "source": "synthetic",
    "num_classes": 5,
    "feature_dim": 16,
    "train_per_class": 400,
    "test_per_class": 200,
    "separation": 1.0,
    "noise_std": 1.0,
    "train_images": "",
    "train_labels": "",
    "test_images": "",
    "test_labels": "",
    "imbalance": null,
    "public_fraction": 0.01
  },
  "model": {"hidden": [32], "activation": "tanh"},
  "partition": {"clients": 10, "alpha": 1.0},
  "training": {
    "rounds": 30,
    "clients_per_round": 10,
    "local_steps": 1,
    "learning_rate": 0.1,
    "batch_mode": "full",
    "batch_size": 128
  },
  "defense": {
    "kind": "none",
    "dp_epsilon": 50.0,
    "dp_delta": 1e-5,
    "clip_bound": "median",
    "history_depth": 0,
    "foolsgold_variant": "full"
  },
  "attack": {
    "enabled": true,
    "alignment_fraction": 0.2,
    "aligned_clients": [],
    "inference_client": -1,
    "inference_rounds": [1],
    "injection_round": 10,
    "injection_client": -1,
    "trigger": {"size": 4, "value": null, "target_label": 0},
    "poison": {
      "poisoned_per_batch": 40,
      "batch_size": 128,
      "epochs": 10,
      "learning_rate": 0.05,
      "gamma": 10.0,
      "gamma_mode": "fixed"
    },
    "evolution": {
      "population_size": 20,
      "nfe_budget": 400,
      "crossover_rate": 0.9,
      "mutation_rate": 0.5,
      "mutation_scale": 0.05
    },
    "augmentation": {
      "theta": 0.8,
      "max_shift": 2.0,
      "max_rotation_deg": 15.0,
      "max_zoom": 0.1,
      "max_shear": 0.1,
      "jitter_std": 0.1,
      "max_growth": 4.0,
      "min_batch": 8,
      "batch_fraction": 0.5
    },
    "aux_size": 0
  }
})";

struct PresetPatch {
  const char* name;
  const char* patch;
};

const PresetPatch kPresets[] = {
    {"setting1", R"({"partition": {"alpha": 1.0}, "dataset": {"imbalance": null}})"},
    {"setting2", R"({"partition": {"alpha": 0.1}, "dataset": {"imbalance": null}})"},
    {"setting3", R"({"partition": {"alpha": 1.0}, "dataset": {"imbalance": [0.5, 1.0]}})"},
    {"setting4", R"({"partition": {"alpha": 0.1}, "dataset": {"imbalance": [0.5, 1.0]}})"},
};

// Collects violations while reading typed fields out of a resolved document.
class Reader {
 public:
  explicit Reader(std::vector<std::string>* errors) : errors_(errors) {}

  void fail(const std::string& path, const std::string& msg) {
    errors_->push_back(path + ": " + msg);
  }

  const Json* child(const Json& obj, const std::string& path,
                    const std::string& key) {
    if (!obj.is_object()) return nullptr;
    auto it = obj.find(key);
    if (it == obj.end()) {
      fail(join(path, key), "missing");
      return nullptr;
    }
    return &*it;
  }

  const Json* object(const Json& obj, const std::string& path,
                     const std::string& key) {
    const Json* v = child(obj, path, key);
    if (v && !v->is_object()) {
      fail(join(path, key), "expected an object");
      return nullptr;
    }
    return v;
  }

  double number(const Json& obj, const std::string& path,
                const std::string& key, double fallback) {
    const Json* v = child(obj, path, key);
    if (!v) return fallback;
    if (!v->is_number()) {
      fail(join(path, key), "expected a number");
      return fallback;
    }
    return v->get<double>();
  }

  long long integer(const Json& obj, const std::string& path,
                    const std::string& key, long long fallback) {
    const Json* v = child(obj, path, key);
    if (!v) return fallback;
    if (!v->is_number_integer()) {
      fail(join(path, key), "expected an integer");
      return fallback;
    }
    return v->get<long long>();
  }

  bool boolean(const Json& obj, const std::string& path, const std::string& key,
               bool fallback) {
    const Json* v = child(obj, path, key);
    if (!v) return fallback;
    if (!v->is_boolean()) {
      fail(join(path, key), "expected true or false");
      return fallback;
    }
    return v->get<bool>();
  }

  std::string string(const Json& obj, const std::string& path,
                     const std::string& key, const std::string& fallback) {
    const Json* v = child(obj, path, key);
    if (!v) return fallback;
    if (!v->is_string()) {
      fail(join(path, key), "expected a string");
      return fallback;
    }
    return v->get<std::string>();
  }

  std::vector<long long> int_list(const Json& obj, const std::string& path,
                                  const std::string& key) {
    std::vector<long long> out;
    const Json* v = child(obj, path, key);
    if (!v) return out;
    if (!v->is_array()) {
      fail(join(path, key), "expected an array of integers");
      return out;
    }
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number_integer()) {
        fail(join(path, key) + "[" + std::to_string(i) + "]",
             "expected an integer");
        continue;
      }
      out.push_back((*v)[i].get<long long>());
    }
    return out;
  }

  void known_keys(const Json& obj, const std::string& path,
                  std::initializer_list<const char*> keys) {
    if (!obj.is_object()) return;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      bool ok = false;
      for (const char* k : keys) ok = ok || it.key() == k;
      if (!ok) fail(join(path, it.key()), "unknown field");
    }
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

 private:
  std::vector<std::string>* errors_;
};

template <typename Parse>
bool parses(Parse&& parse) {
  try {
    parse();
    return true;
  } catch (const ConfigError&) {
    return false;
  }
}

// Reads the resolved document into `cfg`, recording every violation.
void read_config(const Json& doc, ExperimentConfig& cfg,
                 std::vector<std::string>& errors) {
  Reader r(&errors);
  if (!doc.is_object()) {
    errors.push_back("config: expected a JSON object");
    return;
  }
  r.known_keys(doc, "", {"preset", "seed", "output_dir", "jobs", "dataset",
                         "model", "partition", "training", "defense",
                         "attack"});
  if (doc.contains("preset") && doc["preset"].is_string()) {
    cfg.preset = doc["preset"].get<std::string>();
  }
  const Json* seed = r.child(doc, "", "seed");
  if (seed) {
    if (seed->is_number_unsigned() || (seed->is_number_integer() &&
                                       seed->get<long long>() >= 0)) {
      cfg.seed = seed->get<std::uint64_t>();
    } else {
      r.fail("seed", "expected a non-negative integer");
    }
  }
  cfg.output_dir = r.string(doc, "", "output_dir", cfg.output_dir);
  if (r.integer(doc, "", "jobs", 1) < 1) r.fail("jobs", "must be >= 1");

  // dataset
  if (const Json* d = r.object(doc, "", "dataset")) {
    const std::string p = "dataset";
    auto& ds = cfg.dataset;
    r.known_keys(*d, p, {"source", "num_classes", "feature_dim",
                         "train_per_class", "test_per_class", "separation",
                         "noise_std", "train_images", "train_labels",
                         "test_images", "test_labels", "imbalance",
                         "public_fraction"});
    ds.source = r.string(*d, p, "source", ds.source);
    if (ds.source != "synthetic" && ds.source != "idx") {
      r.fail(p + ".source", "must be \"synthetic\" or \"idx\"");
    }
    ds.num_classes = static_cast<int>(r.integer(*d, p, "num_classes", 5));
    if (ds.num_classes < 2) r.fail(p + ".num_classes", "must be >= 2");
    const auto fd = r.integer(*d, p, "feature_dim", 16);
    if (fd < 1) r.fail(p + ".feature_dim", "must be >= 1");
    ds.feature_dim = static_cast<std::size_t>(std::max<long long>(fd, 1));
    const auto tr = r.integer(*d, p, "train_per_class", 400);
    if (tr < 1) r.fail(p + ".train_per_class", "must be >= 1");
    ds.train_per_class = static_cast<std::size_t>(std::max<long long>(tr, 1));
    const auto te = r.integer(*d, p, "test_per_class", 200);
    if (te < 1) r.fail(p + ".test_per_class", "must be >= 1");
    ds.test_per_class = static_cast<std::size_t>(std::max<long long>(te, 1));
    ds.separation = r.number(*d, p, "separation", 1.0);
    if (!(ds.separation >= 0.0)) r.fail(p + ".separation", "must be >= 0");
    ds.noise_std = r.number(*d, p, "noise_std", 1.0);
    if (!(ds.noise_std > 0.0)) r.fail(p + ".noise_std", "must be > 0");
    ds.train_images = r.string(*d, p, "train_images", "");
    ds.train_labels = r.string(*d, p, "train_labels", "");
    ds.test_images = r.string(*d, p, "test_images", "");
    ds.test_labels = r.string(*d, p, "test_labels", "");
    if (ds.source == "idx") {
      for (const char* k :
           {"train_images", "train_labels", "test_images", "test_labels"}) {
        if (!d->contains(k) || !(*d)[k].is_string() ||
            (*d)[k].get<std::string>().empty()) {
          r.fail(p + "." + k, "required for source \"idx\"");
        }
      }
    }
    if (const Json* im = r.child(*d, p, "imbalance")) {
      if (im->is_null()) {
        ds.imbalance.reset();
      } else if (im->is_array() && im->size() == 2 && (*im)[0].is_number() &&
                 (*im)[1].is_number()) {
        const double lo = (*im)[0].get<double>();
        const double hi = (*im)[1].get<double>();
        if (!(lo > 0.0 && lo <= hi && hi <= 1.0)) {
          r.fail(p + ".imbalance", "must satisfy 0 < lo <= hi <= 1");
        }
        ds.imbalance = std::make_pair(lo, hi);
      } else {
        r.fail(p + ".imbalance", "expected null or [lo, hi]");
      }
    }
    ds.public_fraction = r.number(*d, p, "public_fraction", 0.01);
    if (!(ds.public_fraction >= 0.0 && ds.public_fraction < 1.0)) {
      r.fail(p + ".public_fraction", "must be in [0, 1)");
    }
  }

  // model
  if (const Json* m = r.object(doc, "", "model")) {
    const std::string p = "model";
    r.known_keys(*m, p, {"hidden", "activation"});
    cfg.model.hidden.clear();
    for (long long h : r.int_list(*m, p, "hidden")) {
      if (h < 1) {
        r.fail(p + ".hidden", "layer widths must be >= 1");
      } else {
        cfg.model.hidden.push_back(static_cast<std::size_t>(h));
      }
    }
    const std::string act = r.string(*m, p, "activation", "tanh");
    if (!parses([&] { cfg.model.activation = parse_activation(act); })) {
      r.fail(p + ".activation", "unknown activation '" + act + "'");
    }
  }

  // partition
  if (const Json* pt = r.object(doc, "", "partition")) {
    const std::string p = "partition";
    r.known_keys(*pt, p, {"clients", "alpha"});
    cfg.partition.n_clients = static_cast<int>(r.integer(*pt, p, "clients", 10));
    if (cfg.partition.n_clients < 1) r.fail(p + ".clients", "must be >= 1");
    cfg.partition.alpha = r.number(*pt, p, "alpha", 1.0);
    if (!(cfg.partition.alpha > 0.0) || !std::isfinite(cfg.partition.alpha)) {
      r.fail(p + ".alpha", "must be finite and > 0");
    }
  }
  const int n_clients = cfg.partition.n_clients;

  // training
  if (const Json* t = r.object(doc, "", "training")) {
    const std::string p = "training";
    r.known_keys(*t, p, {"rounds", "clients_per_round", "local_steps",
                         "learning_rate", "batch_mode", "batch_size"});
    cfg.rounds = static_cast<int>(r.integer(*t, p, "rounds", 30));
    if (cfg.rounds < 1) r.fail(p + ".rounds", "must be >= 1");
    auto& rc = cfg.round;
    rc.clients_per_round =
        static_cast<int>(r.integer(*t, p, "clients_per_round", 10));
    if (rc.clients_per_round < 1 || rc.clients_per_round > n_clients) {
      r.fail(p + ".clients_per_round",
             "must be in [1, partition.clients = " +
                 std::to_string(n_clients) + "]");
    }
    rc.local_steps = static_cast<int>(r.integer(*t, p, "local_steps", 1));
    if (rc.local_steps < 1) r.fail(p + ".local_steps", "must be >= 1");
    rc.local_lr = r.number(*t, p, "learning_rate", 0.1);
    if (!(rc.local_lr > 0.0)) r.fail(p + ".learning_rate", "must be > 0");
    const std::string mode = r.string(*t, p, "batch_mode", "full");
    if (!parses([&] { rc.batch_mode = parse_batch_mode(mode); })) {
      r.fail(p + ".batch_mode", "must be \"full\" or \"minibatch\"");
    }
    const auto bs = r.integer(*t, p, "batch_size", 128);
    if (bs < 1) r.fail(p + ".batch_size", "must be >= 1");
    rc.batch_size = static_cast<std::size_t>(std::max<long long>(bs, 1));
  }

  // defense
  if (const Json* d = r.object(doc, "", "defense")) {
    const std::string p = "defense";
    auto& df = cfg.defense;
    r.known_keys(*d, p, {"kind", "dp_epsilon", "dp_delta", "clip_bound",
                         "history_depth", "foolsgold_variant"});
    const std::string kind = r.string(*d, p, "kind", "none");
    if (!parses([&] { df.kind = parse_defense_kind(kind); })) {
      r.fail(p + ".kind", "must be \"none\", \"foolsgold\" or \"local_dp\"");
    }
    df.dp_epsilon = r.number(*d, p, "dp_epsilon", 50.0);
    if (!(df.dp_epsilon > 0.0)) r.fail(p + ".dp_epsilon", "must be > 0");
    df.dp_delta = r.number(*d, p, "dp_delta", 1e-5);
    if (!(df.dp_delta > 0.0 && df.dp_delta < 1.0)) {
      r.fail(p + ".dp_delta", "must be in (0, 1)");
    }
    if (const Json* cb = r.child(*d, p, "clip_bound")) {
      if (cb->is_string() && cb->get<std::string>() == "median") {
        df.clip_bound.reset();
      } else if (cb->is_number() && cb->get<double>() > 0.0) {
        df.clip_bound = cb->get<double>();
      } else {
        r.fail(p + ".clip_bound", "expected \"median\" or a positive number");
      }
    }
    df.history_depth = static_cast<int>(r.integer(*d, p, "history_depth", 0));
    if (df.history_depth < 0) r.fail(p + ".history_depth", "must be >= 0");
    const std::string variant = r.string(*d, p, "foolsgold_variant", "full");
    if (!parses([&] { df.foolsgold_variant = parse_foolsgold_variant(variant); })) {
      r.fail(p + ".foolsgold_variant", "must be \"full\" or \"max_cosine\"");
    }
  }

  // attack
  if (const Json* a = r.object(doc, "", "attack")) {
    const std::string p = "attack";
    auto& at = cfg.attack;
    r.known_keys(*a, p, {"enabled", "alignment_fraction", "aligned_clients",
                         "inference_client", "inference_rounds",
                         "injection_round", "injection_client", "trigger",
                         "poison", "evolution", "augmentation", "aux_size"});
    at.enabled = r.boolean(*a, p, "enabled", false);
    at.alignment_fraction = r.number(*a, p, "alignment_fraction", 0.0);
    if (!(at.alignment_fraction >= 0.0 && at.alignment_fraction <= 1.0)) {
      r.fail(p + ".alignment_fraction", "must be in [0, 1]");
    }
    at.aligned_clients.clear();
    std::set<long long> seen;
    for (long long id : r.int_list(*a, p, "aligned_clients")) {
      if (id < 0 || id >= n_clients) {
        r.fail(p + ".aligned_clients", "client id " + std::to_string(id) +
                                           " is not < partition.clients");
      } else if (!seen.insert(id).second) {
        r.fail(p + ".aligned_clients", "duplicate client id " +
                                           std::to_string(id));
      } else {
        at.aligned_clients.push_back(static_cast<int>(id));
      }
    }
    at.inference_client =
        static_cast<int>(r.integer(*a, p, "inference_client", -1));
    if (at.inference_client < -1 || at.inference_client >= n_clients) {
      r.fail(p + ".inference_client", "must be -1 or a client id < partition.clients");
    }
    at.inference_rounds.clear();
    for (long long round : r.int_list(*a, p, "inference_rounds")) {
      if (at.enabled && (round < 1 || round > cfg.rounds)) {
        r.fail(p + ".inference_rounds", "round " + std::to_string(round) +
                                            " outside [1, training.rounds]");
      } else {
        at.inference_rounds.push_back(static_cast<int>(round));
      }
    }
    at.injection_round =
        static_cast<int>(r.integer(*a, p, "injection_round", 0));
    if (at.injection_round < 0 ||
        (at.enabled && at.injection_round > cfg.rounds)) {
      r.fail(p + ".injection_round", "must be in [0, training.rounds]");
    }
    at.injection_client =
        static_cast<int>(r.integer(*a, p, "injection_client", -1));
    if (at.injection_client < -1 || at.injection_client >= n_clients) {
      r.fail(p + ".injection_client", "must be -1 or a client id < partition.clients");
    }
    const auto aux = r.integer(*a, p, "aux_size", 0);
    if (aux < 0) r.fail(p + ".aux_size", "must be >= 0");
    at.aux_size = static_cast<std::size_t>(std::max<long long>(aux, 0));

    if (const Json* t = r.object(*a, p, "trigger")) {
      const std::string q = p + ".trigger";
      r.known_keys(*t, q, {"size", "value", "target_label"});
      const auto size = r.integer(*t, q, "size", 4);
      if (size < 1) r.fail(q + ".size", "must be >= 1");
      at.trigger_size = static_cast<std::size_t>(std::max<long long>(size, 1));
      if (cfg.dataset.source == "synthetic" &&
          at.trigger_size > cfg.dataset.feature_dim) {
        r.fail(q + ".size", "exceeds dataset.feature_dim");
      }
      if (const Json* v = r.child(*t, q, "value")) {
        if (v->is_null()) {
          at.trigger_value.reset();
        } else if (v->is_number() && std::isfinite(v->get<double>())) {
          at.trigger_value = v->get<double>();
        } else {
          r.fail(q + ".value", "expected null or a finite number");
        }
      }
      at.target_label = static_cast<int>(r.integer(*t, q, "target_label", 0));
      if (at.target_label < 0 || at.target_label >= cfg.dataset.num_classes) {
        r.fail(q + ".target_label", "must be in [0, dataset.num_classes)");
      }
    }

    if (const Json* po = r.object(*a, p, "poison")) {
      const std::string q = p + ".poison";
      auto& pc = at.poison;
      r.known_keys(*po, q, {"poisoned_per_batch", "batch_size", "epochs",
                            "learning_rate", "gamma", "gamma_mode"});
      const auto ppb = r.integer(*po, q, "poisoned_per_batch", 40);
      const auto bs = r.integer(*po, q, "batch_size", 128);
      if (ppb < 0) r.fail(q + ".poisoned_per_batch", "must be >= 0");
      if (bs < 1) r.fail(q + ".batch_size", "must be >= 1");
      if (ppb > bs) {
        r.fail(q + ".poisoned_per_batch", "exceeds attack.poison.batch_size");
      }
      pc.poisoned_per_batch = static_cast<std::size_t>(std::max<long long>(ppb, 0));
      pc.batch_size = static_cast<std::size_t>(std::max<long long>(bs, 1));
      pc.poison_epochs = static_cast<int>(r.integer(*po, q, "epochs", 10));
      if (pc.poison_epochs < 1) r.fail(q + ".epochs", "must be >= 1");
      pc.poison_lr = r.number(*po, q, "learning_rate", 0.05);
      if (!(pc.poison_lr > 0.0)) r.fail(q + ".learning_rate", "must be > 0");
      pc.gamma = r.number(*po, q, "gamma", 10.0);
      if (!(pc.gamma >= 1.0) || !std::isfinite(pc.gamma)) {
        r.fail(q + ".gamma", "must be finite and >= 1");
      }
      const std::string gm = r.string(*po, q, "gamma_mode", "fixed");
      if (!parses([&] { pc.gamma_mode = parse_gamma_mode(gm); })) {
        r.fail(q + ".gamma_mode",
               "must be \"fixed\", \"clients_per_round\" or \"sample_ratio\"");
      }
    }

    if (const Json* ev = r.object(*a, p, "evolution")) {
      const std::string q = p + ".evolution";
      auto& ec = at.evolution;
      r.known_keys(*ev, q, {"population_size", "nfe_budget", "crossover_rate",
                            "mutation_rate", "mutation_scale"});
      ec.population_size = static_cast<int>(r.integer(*ev, q, "population_size", 20));
      if (ec.population_size < 2) r.fail(q + ".population_size", "must be >= 2");
      ec.nfe_budget = static_cast<int>(r.integer(*ev, q, "nfe_budget", 400));
      if (ec.nfe_budget < ec.population_size) {
        r.fail(q + ".nfe_budget", "must be >= population_size");
      }
      ec.crossover_rate = r.number(*ev, q, "crossover_rate", 0.9);
      if (!(ec.crossover_rate >= 0.0 && ec.crossover_rate <= 1.0)) {
        r.fail(q + ".crossover_rate", "must be in [0, 1]");
      }
      ec.mutation_rate = r.number(*ev, q, "mutation_rate", 0.5);
      if (!(ec.mutation_rate >= 0.0 && ec.mutation_rate <= 1.0)) {
        r.fail(q + ".mutation_rate", "must be in [0, 1]");
      }
      ec.mutation_scale = r.number(*ev, q, "mutation_scale", 0.05);
      if (!(ec.mutation_scale >= 0.0) || !std::isfinite(ec.mutation_scale)) {
        r.fail(q + ".mutation_scale", "must be finite and >= 0");
      }
    }

    if (const Json* au = r.object(*a, p, "augmentation")) {
      const std::string q = p + ".augmentation";
      auto& ap = at.augmentation;
      r.known_keys(*au, q, {"theta", "max_shift", "max_rotation_deg",
                            "max_zoom", "max_shear", "jitter_std", "max_growth",
                            "min_batch", "batch_fraction"});
      ap.theta = r.number(*au, q, "theta", 0.8);
      if (!(ap.theta >= 0.0 && ap.theta <= 1.0)) {
        r.fail(q + ".theta", "must be in [0, 1]");
      }
      ap.max_shift = r.number(*au, q, "max_shift", 2.0);
      ap.max_rotation_deg = r.number(*au, q, "max_rotation_deg", 15.0);
      ap.max_zoom = r.number(*au, q, "max_zoom", 0.1);
      ap.max_shear = r.number(*au, q, "max_shear", 0.1);
      ap.jitter_std = r.number(*au, q, "jitter_std", 0.1);
      for (const auto& [key, v] :
           {std::pair<const char*, double>{"max_shift", ap.max_shift},
            {"max_rotation_deg", ap.max_rotation_deg},
            {"max_zoom", ap.max_zoom},
            {"max_shear", ap.max_shear},
            {"jitter_std", ap.jitter_std}}) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
          r.fail(q + "." + key, "must be finite and >= 0");
        }
      }
      if (!(ap.max_zoom < 1.0)) r.fail(q + ".max_zoom", "must be < 1");
      ap.max_growth = r.number(*au, q, "max_growth", 4.0);
      if (!(ap.max_growth >= 1.0)) r.fail(q + ".max_growth", "must be >= 1");
      const auto mb = r.integer(*au, q, "min_batch", 8);
      if (mb < 1) r.fail(q + ".min_batch", "must be >= 1");
      ap.min_batch = static_cast<std::size_t>(std::max<long long>(mb, 1));
      ap.batch_fraction = r.number(*au, q, "batch_fraction", 0.5);
      if (!(ap.batch_fraction > 0.0 && ap.batch_fraction <= 1.0)) {
        r.fail(q + ".batch_fraction", "must be in (0, 1]");
      }
    }

    if (at.enabled) {
      const bool has_inference = !at.inference_rounds.empty();
      const bool has_aligned =
          !at.aligned_clients.empty() || at.alignment_fraction > 0.0;
      if (has_aligned && !has_inference) {
        r.fail(p + ".inference_rounds",
               "alignment needs at least one inference round");
      }
      if (has_inference && !has_aligned && at.inference_client < 0) {
        r.fail(p + ".inference_client",
               "required when no client is aligned");
      }
    }
  }
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& p : kPresets) out.emplace_back(p.name);
  return out;
}

Json deep_merge(Json base, const Json& patch) {
  if (!base.is_object() || !patch.is_object()) return patch;
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    auto found = base.find(it.key());
    if (found != base.end() && found->is_object() && it->is_object()) {
      *found = deep_merge(*found, *it);
    } else {
      base[it.key()] = *it;
    }
  }
  return base;
}

Json preset_document(const std::string& name) {
  for (const auto& p : kPresets) {
    if (name == p.name) {
      Json doc = deep_merge(Json::parse(kBasePreset), Json::parse(p.patch));
      doc["preset"] = name;
      return doc;
    }
  }
  throw ConfigError("unknown preset '" + name + "'");
}

Json resolve_config(const Json& doc,
                    const std::optional<std::string>& preset_override) {
  if (!doc.is_object()) throw ConfigError("config: expected a JSON object");
  std::string preset = "setting1";
  if (preset_override) {
    preset = *preset_override;
  } else if (doc.contains("preset")) {
    if (!doc["preset"].is_string()) {
      throw ConfigError("preset: expected a string");
    }
    preset = doc["preset"].get<std::string>();
  }
  Json patch = doc;
  patch.erase("preset");
  Json out = deep_merge(preset_document(preset), patch);
  out["preset"] = preset;
  return out;
}

std::vector<std::string> validate_config(const Json& resolved) {
  std::vector<std::string> errors;
  ExperimentConfig cfg;
  read_config(resolved, cfg, errors);
  return errors;
}

ExperimentConfig parse_config(const Json& doc,
                              const std::optional<std::string>& preset_override) {
  ExperimentConfig cfg;
  cfg.resolved = resolve_config(doc, preset_override);
  std::vector<std::string> errors;
  read_config(cfg.resolved, cfg, errors);
  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return cfg;
}

Json read_json_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path + ": malformed JSON: " + e.what());
  }
}

namespace {

struct Population {
  Dataset train;
  Dataset test;
  Dataset pool;
};

Population build_population(const ExperimentConfig& cfg) {
  const auto& ds = cfg.dataset;
  Population out;
  if (ds.source == "synthetic") {
    SyntheticSpec spec;
    spec.num_classes = ds.num_classes;
    spec.feature_dim = ds.feature_dim;
    spec.separation = ds.separation;
    spec.noise_std = ds.noise_std;
    spec.seed = derive_seed(cfg.seed, "dataset");
    spec.per_class = ds.train_per_class;
    out.train = synthesize(spec, 0);
    spec.per_class = ds.test_per_class;
    out.test = synthesize(spec, 1);
  } else {
    out.train = load_idx_dataset(ds.train_images, ds.train_labels,
                                 ds.num_classes);
    out.test = load_idx_dataset(ds.test_images, ds.test_labels, ds.num_classes);
  }
  if (ds.imbalance) {
    Rng rng(derive_seed(cfg.seed, "imbalance"));
    out.train = global_downsample(out.train, ds.imbalance->first,
                                  ds.imbalance->second, rng);
  }
  Rng pool_rng(derive_seed(cfg.seed, "public_pool"));
  auto [rest, pool] = split_public_pool(out.train, ds.public_fraction, pool_rng);
  out.train = std::move(rest);
  out.pool = std::move(pool);
  return out;
}

Json distribution_json(const LabelDistribution& p) {
  return Json(std::vector<double>(p.probs().begin(), p.probs().end()));
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const RunOptions& options) {
  ExperimentResult result;
  Population pop = build_population(cfg);

  PartitionSpec part = cfg.partition;
  part.seed = derive_seed(cfg.seed, "partition");
  std::vector<Dataset> clients = dirichlet_partition(pop.train, part);
  result.population = label_distribution(pop.train);
  double o2t = 0.0;
  for (const auto& c : clients) {
    result.client_distributions.push_back(label_distribution(c));
    o2t += l2_distance(result.client_distributions.back(), result.population);
  }
  result.original_to_true_mean = o2t / static_cast<double>(clients.size());

  NetworkArch arch;
  arch.layer_sizes.push_back(pop.train.feature_dim());
  for (std::size_t h : cfg.model.hidden) arch.layer_sizes.push_back(h);
  arch.layer_sizes.push_back(static_cast<std::size_t>(cfg.dataset.num_classes));
  arch.activation = cfg.model.activation;
  arch.validate();
  Rng init_rng(derive_seed(cfg.seed, "init"));
  const ParamVector initial = init_params(arch, init_rng);

  FederatedSimulation sim(arch, clients, cfg.round, cfg.defense, initial,
                          derive_seed(cfg.seed, "simulation"));
  sim.set_jobs(options.jobs);

  const AttackConfig& ac = cfg.attack;
  const bool attack_on = ac.enabled && !options.no_attack;
  std::optional<TriggerSpec> trigger;
  std::optional<TwoPhaseAttack> attack;
  if (attack_on) {
    AttackPlan plan;
    const int n = part.n_clients;
    plan.aligned_clients = ac.aligned_clients;
    if (plan.aligned_clients.empty() && ac.alignment_fraction > 0.0) {
      const auto count = static_cast<std::size_t>(
          std::llround(ac.alignment_fraction * n));
      Rng pick(derive_seed(cfg.seed, "aligned_clients"));
      plan.aligned_clients = sample_without_replacement(
          pick, n, static_cast<int>(std::max<std::size_t>(count, 1)));
      std::sort(plan.aligned_clients.begin(), plan.aligned_clients.end());
    }
    result.aligned_clients = plan.aligned_clients;
    plan.inference_client = ac.inference_client;
    if (plan.inference_client < 0 && !plan.aligned_clients.empty()) {
      plan.inference_client = plan.aligned_clients.front();
    }
    plan.inference_rounds = ac.inference_rounds;
    if (ac.injection_round > 0) {
      int who = ac.injection_client;
      if (who < 0) {
        Rng pick(derive_seed(cfg.seed, "injection_client"));
        who = static_cast<int>(pick.uniform_index(static_cast<std::uint64_t>(n)));
      }
      result.injection_client = who;
      plan.injections.push_back(Injection{ac.injection_round, who});
      const double value =
          ac.trigger_value.value_or(pop.train.max_feature_value());
      trigger = pop.train.is_image()
                    ? TriggerSpec::image_block(pop.train.image_width(),
                                               ac.trigger_size, value,
                                               ac.target_label)
                    : TriggerSpec::leading_features(ac.trigger_size, value,
                                                    ac.target_label);
      plan.trigger = *trigger;
    }
    plan.augmentation = ac.augmentation;
    plan.evolution = ac.evolution;
    plan.evolution.seed = derive_seed(cfg.seed, "evolution");
    plan.aux_size = ac.aux_size;
    plan.poison = ac.poison;
    plan.seed = derive_seed(cfg.seed, "attack");
    plan.jobs = options.jobs;
    attack.emplace(std::move(plan), arch, sim.clients(), cfg.round,
                   pop.pool.empty() ? nullptr : &pop.pool);
  }

  run_training(sim, cfg.rounds, attack ? &*attack : nullptr,
               [&](RoundLog& log) {
                 const double acc =
                     main_accuracy(arch, log.global_after, pop.test);
                 log.metrics["accuracy"] = acc;
                 result.accuracy.add(log.round, acc);
                 if (trigger) {
                   const double bd = backdoor_success(arch, log.global_after,
                                                      pop.test, *trigger);
                   log.metrics["backdoor_success"] = bd;
                   result.backdoor.add(log.round, bd);
                 }
               });
  result.final_params = sim.global();

  if (attack) {
    for (const auto& rec : attack->inferences()) {
      InferenceSummary s;
      s.round = rec.round;
      s.result = rec.result;
      s.inferred_to_true = l2_distance(rec.result.p_hat, result.population);
      s.augmented_rows = rec.augmented_rows;
      result.inferences.push_back(std::move(s));
    }
  }
  if (trigger && ac.injection_round + 9 <= cfg.rounds) {
    result.backdoor_window =
        success_window_stats(result.backdoor, ac.injection_round, 10);
  }

  // Manifest.
  Json m;
  m["config"] = cfg.resolved;
  m["seed"] = cfg.seed;
  m["rng_version"] = kRngVersion;
  m["attack_active"] = attack_on;
  Json files = Json::object();
  files["accuracy"] = "accuracy.csv";
  if (trigger) files["backdoor_success"] = "backdoor_success.csv";
  m["files"] = files;
  m["population_distribution"] = distribution_json(result.population);
  Json cds = Json::array();
  for (const auto& d : result.client_distributions) {
    cds.push_back(distribution_json(d));
  }
  m["client_distributions"] = cds;
  m["original_to_true_mean"] = result.original_to_true_mean;
  m["aligned_clients"] = result.aligned_clients;
  m["injection_client"] = result.injection_client;
  Json inf = Json::array();
  for (const auto& s : result.inferences) {
    Json j;
    j["round"] = s.round;
    j["p_hat"] = distribution_json(s.result.p_hat);
    j["objective"] = s.result.objective;
    j["nfe_used"] = s.result.nfe_used;
    j["inferred_to_true"] = s.inferred_to_true;
    j["augmented_rows"] = s.augmented_rows;
    std::vector<int> unreliable;
    for (std::size_t c = 0; c < s.result.unreliable.size(); ++c) {
      if (s.result.unreliable[c]) unreliable.push_back(static_cast<int>(c));
    }
    j["unreliable_classes"] = unreliable;
    inf.push_back(j);
  }
  m["inferences"] = inf;
  if (result.backdoor_window) {
    m["backdoor_window"] = {{"first_round", result.backdoor_window->first_round},
                            {"last_round", result.backdoor_window->last_round},
                            {"mean", result.backdoor_window->mean},
                            {"std", result.backdoor_window->std}};
  } else {
    m["backdoor_window"] = nullptr;
  }
  m["final_accuracy"] = result.accuracy.points().back().second;
  result.manifest = m;

  if (options.write_outputs) {
    const std::string dir = cfg.output_dir;
    write_file_atomic(dir + "/accuracy.csv", series_to_csv(result.accuracy));
    if (trigger) {
      write_file_atomic(dir + "/backdoor_success.csv",
                        series_to_csv(result.backdoor));
    }
    write_file_atomic(dir + "/manifest.json", m.dump(2) + "\n");
  }
  return result;
}

}  // namespace fedalign
