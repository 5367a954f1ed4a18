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

// Pseudo-label ensemble baseline in the style of DroidEvolver: five linear
// passive-aggressive learners, a weighted vote, and monthly retraining of
// the members that disagree with the vote.

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "morph/data.hpp"
#include "morph/metrics.hpp"

namespace morph::baseline {

inline constexpr std::size_t kEnsembleSize = 5;

// {0, 1} class label to {-1, +1}.
constexpr int to_signed(int label) { return label == data::kMalware ? 1 : -1; }
constexpr int to_class(int signed_label) { return signed_label > 0 ? data::kMalware : data::kBenign; }

struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;
  // PA-I cap on the step size; infinity gives the classic PA update.
  double aggressiveness = std::numeric_limits<double>::infinity();

  double score(std::span<const double> x) const;
  // sign(score) with 0 mapped to -1 (benign).
  int label(std::span<const double> x) const;
};

// Hinge loss l = max(0, 1 - y s(x)); step t = min(C, l / (|x|^2 + 1)) with
// the bias treated as a constant-1 feature. y must be -1 or +1.
void pa_update(LinearModel& model, std::span<const double> x, int y);

struct EnsembleVote {
  int label = -1;  // -1 benign, +1 malware
  double score = 0.0;
  std::array<int, kEnsembleSize> member_labels{};

  // Members whose label differs from the ensemble label.
  std::vector<std::size_t> deviating() const;
};

struct DEEnsemble {
  std::array<LinearModel, kEnsembleSize> models;
  std::array<double, kEnsembleSize> model_weights{};
  // Members agreeing with the vote on less than this fraction of a month
  // lose their voting weight for the next month.
  double aging_threshold = 0.5;

  void validate() const;
};

struct DEOptions {
  int epochs = 5;
  std::array<double, kEnsembleSize> aggressiveness = {0.001, 0.01, 0.1, 1.0, 10.0};
  double aging_threshold = 0.5;
  double init_scale = 0.01;
};

// Each member starts from its own small random weights and makes `epochs`
// passes over the labeled training set in its own shuffled order.
DEEnsemble train_ensemble(std::span<const data::Sample> train, const DEOptions& options,
                          std::uint64_t seed);

// score = sum_i w_i sign(s_i(x)); label = sign(score), 0 -> benign.
EnsembleVote ensemble_predict(const DEEnsemble& ensemble, std::span<const double> x);

// Scores the month with the frozen ensemble and records metrics. With
// updates on, each member is then PA-updated toward the ensemble label on
// every sample where it deviated, and weights become the month's agreement
// rates (renormalized).
eval::MetricsRecord update_month(DEEnsemble& ensemble, const data::MonthBatch& batch,
                                 bool apply_updates);

}  // namespace morph::baseline
