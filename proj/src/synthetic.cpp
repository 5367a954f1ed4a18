// Copyright 2026 The MORPH Drift Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "morph/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "morph/errors.hpp"
#include "morph/random.hpp"

namespace morph::data {
namespace {

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

// Box-Muller on uniform01 so streams are identical across standard libraries.
class Gaussian {
 public:
  explicit Gaussian(std::uint64_t seed) : rng_(seed) {}

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform01(rng_);
    } while (u1 <= 0.0);
    const double u2 = uniform01(rng_);
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  Rng& rng() { return rng_; }

 private:
  Rng rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

Sample draw(const SyntheticConfig& c, Gaussian& g, double angle_deg, int label, int month,
            std::optional<std::string> family) {
  Sample s;
  s.features.resize(static_cast<std::size_t>(c.feature_dim));
  const double a = radians(angle_deg);
  for (int j = 0; j < c.feature_dim; ++j) {
    double mean = 0.0;
    if (j == 0) mean = std::cos(a);
    if (j == 1) mean = std::sin(a);
    s.features[static_cast<std::size_t>(j)] = mean + c.sigma * g();
  }
  s.label = label;
  s.month = month;
  s.family = std::move(family);
  return s;
}

std::vector<int> shuffled_labels(int n, double malware_fraction, Rng& rng) {
  const auto n_mal = static_cast<int>(std::lround(n * malware_fraction));
  std::vector<int> labels(static_cast<std::size_t>(n), kBenign);
  for (int i = 0; i < n_mal; ++i) labels[static_cast<std::size_t>(i)] = kMalware;
  shuffle(labels, rng);
  return labels;
}

double benign_angle_deg(const SyntheticConfig& c, int month, Rng& rng) {
  double a = c.families > 0 || !c.rotate_benign ? 180.0 : 180.0 + month * c.rotation_deg;
  // No draw at zero spread keeps such streams independent of this option.
  if (c.benign_spread_deg > 0.0) a += c.benign_spread_deg * (2.0 * uniform01(rng) - 1.0);
  return a;
}

// Rotation mode split at a given month.
std::vector<Sample> rotation_split(const SyntheticConfig& c, Gaussian& g, int n, int month) {
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int label : shuffled_labels(n, c.malware_fraction, g.rng())) {
    if (label == kBenign) {
      out.push_back(draw(c, g, benign_angle_deg(c, month, g.rng()), label, month, std::nullopt));
      continue;
    }
    int step = month;
    if (month > 0 && c.new_family_fraction > 0.0 && uniform01(g.rng()) < c.new_family_fraction) {
      step = month + 1;
    }
    out.push_back(draw(c, g, step * c.rotation_deg, label, month, "r" + std::to_string(step)));
  }
  return out;
}

// Training frequency of family f is proportional to (families - f).
std::vector<int> training_family_counts(const SyntheticConfig& c, int n_malware) {
  const int total_weight = c.families * (c.families + 1) / 2;
  std::vector<int> counts(static_cast<std::size_t>(c.families));
  int assigned = 0;
  for (int f = 0; f < c.families; ++f) {
    counts[static_cast<std::size_t>(f)] = n_malware * (c.families - f) / total_weight;
    assigned += counts[static_cast<std::size_t>(f)];
  }
  for (int f = 0; assigned < n_malware; f = (f + 1) % c.families, ++assigned) {
    ++counts[static_cast<std::size_t>(f)];
  }
  return counts;
}

std::vector<Sample> family_split(const SyntheticConfig& c, Gaussian& g, int n, int month,
                                 bool training) {
  std::vector<int> labels = shuffled_labels(n, c.malware_fraction, g.rng());
  std::vector<int> family_of;
  int n_mal = 0;
  for (int l : labels) n_mal += l == kMalware;
  if (training) {
    const auto counts = training_family_counts(c, n_mal);
    for (int f = 0; f < c.families; ++f) family_of.insert(family_of.end(), counts[static_cast<std::size_t>(f)], f);
    shuffle(family_of, g.rng());
  } else {
    const int newest = std::min(c.families, c.initial_families + month) - 1;
    const int oldest = c.family_lifetime > 0 ? std::max(0, newest - c.family_lifetime + 1) : 0;
    const auto span = static_cast<std::uint64_t>(newest - oldest + 1);
    for (int i = 0; i < n_mal; ++i) {
      family_of.push_back(oldest + static_cast<int>(uniform_index(g.rng(), span)));
    }
  }
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(n));
  std::size_t next = 0;
  for (int label : labels) {
    if (label == kBenign) {
      out.push_back(draw(c, g, benign_angle_deg(c, month, g.rng()), label, month, std::nullopt));
    } else {
      const int f = family_of[next++];
      out.push_back(draw(c, g, family_angle_deg(c, f), label, month, family_name(f)));
    }
  }
  return out;
}

}  // namespace

void SyntheticConfig::validate() const {
  if (feature_dim < 2) throw ConfigError("synthetic: feature_dim must be >= 2");
  if (months < 1) throw ConfigError("synthetic: months must be >= 1");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("synthetic: sigma must be > 0");
  if (!(rotation_deg >= 0.0 && rotation_deg <= 90.0)) {
    throw ConfigError("synthetic: rotation_deg must be in [0, 90]");
  }
  if (samples_per_month < 1) throw ConfigError("synthetic: samples_per_month must be >= 1");
  if (!(malware_fraction > 0.0 && malware_fraction < 1.0)) {
    throw ConfigError("synthetic: malware_fraction must be in (0, 1)");
  }
  if (train_samples < 2) throw ConfigError("synthetic: train_samples must be >= 2");
  if (dev_samples < 0) throw ConfigError("synthetic: dev_samples must be >= 0");
  if (!(new_family_fraction >= 0.0 && new_family_fraction <= 1.0)) {
    throw ConfigError("synthetic: new_family_fraction must be in [0, 1]");
  }
  if (!(benign_spread_deg >= 0.0 && benign_spread_deg < 90.0)) {
    throw ConfigError("synthetic: benign_spread_deg must be in [0, 90)");
  }
  if (families < 0) throw ConfigError("synthetic: families must be >= 0");
  if (families > 0) {
    if (family_lifetime < 0) throw ConfigError("synthetic: family_lifetime must be >= 0");
    if (initial_families < 1 || initial_families > families) {
      throw ConfigError("synthetic: initial_families must be in [1, families]");
    }
    if (!(family_spacing_deg > 0.0) ||
        (families - 1) * family_spacing_deg >= 180.0 - benign_spread_deg) {
      throw ConfigError("synthetic: malware families must stay clear of the benign arc");
    }
  }
}

SyntheticConfig SyntheticConfig::preset(std::string_view name) {
  SyntheticConfig c;
  if (name == "default" || name == "canonical") return c;
  if (name == "severe") {
    c.rotation_deg = 20.0;
    return c;
  }
  if (name == "families") {
    c.families = 10;
    c.initial_families = 3;
    c.rotation_deg = 0.0;
    c.benign_spread_deg = 20.0;
    c.family_spacing_deg = 17.0;
    c.family_lifetime = 3;
    return c;
  }
  throw ConfigError("unknown synthetic preset '" + std::string(name) + "'");
}

double malware_angle_deg(const SyntheticConfig& c, int month) {
  return c.families > 0 ? 0.0 : month * c.rotation_deg;
}

double family_angle_deg(const SyntheticConfig& c, int family) {
  return family * c.family_spacing_deg;
}

std::string family_name(int family) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "fam%02d", family);
  return buf;
}

DriftStream gen_synthetic(const SyntheticConfig& c, std::uint64_t seed) {
  c.validate();
  DriftStream stream;
  stream.feature_dim = c.feature_dim;
  // One generator per split keeps splits independent of each other's sizes.
  Gaussian train_gen(derive_seed(seed, 0));
  Gaussian dev_gen(derive_seed(seed, 1));
  if (c.families > 0) {
    stream.train = family_split(c, train_gen, c.train_samples, 0, true);
    stream.dev = family_split(c, dev_gen, c.dev_samples, 0, true);
  } else {
    stream.train = rotation_split(c, train_gen, c.train_samples, 0);
    stream.dev = rotation_split(c, dev_gen, c.dev_samples, 0);
  }
  for (int t = 1; t <= c.months; ++t) {
    Gaussian g(derive_seed(seed, static_cast<std::uint64_t>(t) + 1));
    MonthBatch batch{t, c.families > 0 ? family_split(c, g, c.samples_per_month, t, false)
                                       : rotation_split(c, g, c.samples_per_month, t)};
    stream.test_months.push_back(std::move(batch));
  }
  stream.validate();
  return stream;
}

}  // namespace morph::data
