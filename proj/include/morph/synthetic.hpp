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

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "morph/data.hpp"

namespace morph::data {

// Gaussian two-class stream whose class means move in the plane spanned by
// the first two features; the remaining features are pure noise.
//
// Rotation mode (families == 0): benign starts at (-1, 0), malware at
// (+1, 0), and both rotate by rotation_deg per month. Train and dev are
// drawn at month 0, test month t at rotation t * rotation_deg. Malware
// family tags are "r<k>" for rotation step k.
//
// Family mode (families > 0): benign stays around (-1, 0); malware family f
// sits at angle f * family_spacing_deg on the unit circle. Training malware covers
// all families with frequency decreasing in f (so the top-k families are
// fam00..fam{k-1}). Test month t draws uniformly from the families up to
// newest = min(families, initial_families + t) - 1; with family_lifetime > 0
// only the `family_lifetime` newest of those are still active.
//
// benign_spread_deg > 0 draws each benign mean angle uniformly from
// +-spread around the benign centre, so benign is an arc rather than a point.
struct SyntheticConfig {
  int feature_dim = 10;
  int months = 12;
  double rotation_deg = 10.0;
  double sigma = 0.05;
  int samples_per_month = 500;
  double malware_fraction = 0.5;
  int train_samples = 1000;
  int dev_samples = 500;
  // Fraction of each test month's malware drawn one rotation step ahead.
  double new_family_fraction = 0.0;
  bool rotate_benign = true;
  double benign_spread_deg = 0.0;

  int families = 0;
  int initial_families = 3;
  double family_spacing_deg = 18.0;
  int family_lifetime = 0;  // months a family stays active; 0 = forever

  // Throws ConfigError.
  void validate() const;

  // "default"/"canonical", "severe" (20 deg/month), "families".
  static SyntheticConfig preset(std::string_view name);
};

DriftStream gen_synthetic(const SyntheticConfig& config, std::uint64_t seed);

// Angle (degrees) of the malware mean, or of a family's mean, at a month.
double malware_angle_deg(const SyntheticConfig& config, int month);
double family_angle_deg(const SyntheticConfig& config, int family);
std::string family_name(int family);

}  // namespace morph::data
