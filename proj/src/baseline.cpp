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

#include "morph/baseline.hpp"

#include <cmath>
#include <numeric>

#include "morph/errors.hpp"
#include "morph/random.hpp"

namespace morph::baseline {
namespace {

void check_finite(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) throw InputError("non-finite feature value");
  }
}

}  // namespace

double LinearModel::score(std::span<const double> x) const {
  if (x.size() != weights.size()) throw ShapeError("linear model: feature dimension mismatch");
  return std::inner_product(x.begin(), x.end(), weights.begin(), bias);
}

int LinearModel::label(std::span<const double> x) const { return score(x) > 0.0 ? 1 : -1; }

void pa_update(LinearModel& model, std::span<const double> x, int y) {
  if (y != 1 && y != -1) throw InputError("PA target must be -1 or +1");
  check_finite(x);
  const double loss = std::max(0.0, 1.0 - y * model.score(x));
  if (loss == 0.0) return;
  const double norm2 = std::inner_product(x.begin(), x.end(), x.begin(), 0.0) + 1.0;
  const double step = std::min(model.aggressiveness, loss / norm2);
  for (std::size_t j = 0; j < x.size(); ++j) model.weights[j] += step * y * x[j];
  model.bias += step * y;
}

std::vector<std::size_t> EnsembleVote::deviating() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < kEnsembleSize; ++i) {
    if (member_labels[i] != label) out.push_back(i);
  }
  return out;
}

void DEEnsemble::validate() const {
  double sum = 0.0;
  for (double w : model_weights) {
    if (!(w >= 0.0)) throw InvariantError("ensemble weight is negative or NaN");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvariantError("ensemble weights do not sum to 1");
  if (!(aging_threshold > 0.0 && aging_threshold <= 1.0)) {
    throw ConfigError("aging_threshold must be in (0, 1]");
  }
}

DEEnsemble train_ensemble(std::span<const data::Sample> train, const DEOptions& options,
                          std::uint64_t seed) {
  if (train.empty()) throw InputError("baseline needs a non-empty training set");
  if (options.epochs < 1) throw ConfigError("baseline epochs must be >= 1");
  const std::size_t d = train.front().features.size();
  DEEnsemble ens;
  ens.aging_threshold = options.aging_threshold;
  ens.model_weights.fill(1.0 / kEnsembleSize);
  for (std::size_t m = 0; m < kEnsembleSize; ++m) {
    Rng rng(derive_seed(seed, m));
    LinearModel& model = ens.models[m];
    model.aggressiveness = options.aggressiveness[m];
    model.weights.resize(d);
    for (double& w : model.weights) w = (2.0 * uniform01(rng) - 1.0) * options.init_scale;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (int e = 0; e < options.epochs; ++e) {
      shuffle(order, rng);
      for (std::size_t i : order) {
        const auto& s = train[i];
        if (!s.label) throw InputError("baseline training sample without a label");
        pa_update(model, s.features, to_signed(*s.label));
      }
    }
  }
  ens.validate();
  return ens;
}

EnsembleVote ensemble_predict(const DEEnsemble& ens, std::span<const double> x) {
  check_finite(x);
  EnsembleVote vote;
  for (std::size_t i = 0; i < kEnsembleSize; ++i) {
    vote.member_labels[i] = ens.models[i].label(x);
    vote.score += ens.model_weights[i] * vote.member_labels[i];
  }
  vote.label = vote.score > 0.0 ? 1 : -1;
  return vote;
}

eval::MetricsRecord update_month(DEEnsemble& ens, const data::MonthBatch& batch,
                                 bool apply_updates) {
  if (batch.samples.empty()) throw InputError("empty month batch");
  std::vector<EnsembleVote> votes;
  votes.reserve(batch.size());
  std::vector<int> predicted;
  std::vector<int> truth;
  for (const auto& s : batch.samples) {
    votes.push_back(ensemble_predict(ens, s.features));
    predicted.push_back(to_class(votes.back().label));
    if (!s.label) throw InputError("test sample without ground truth");
    truth.push_back(*s.label);
  }
  eval::MetricsRecord record = eval::compute_metrics(predicted, truth, batch.month);
  if (!apply_updates) return record;

  std::array<std::size_t, kEnsembleSize> agree{};
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const auto& vote = votes[k];
    for (std::size_t i = 0; i < kEnsembleSize; ++i) {
      if (vote.member_labels[i] == vote.label) {
        ++agree[i];
      } else {
        pa_update(ens.models[i], batch.samples[k].features, vote.label);
      }
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < kEnsembleSize; ++i) {
    const double rate = static_cast<double>(agree[i]) / static_cast<double>(batch.size());
    ens.model_weights[i] = rate >= ens.aging_threshold ? rate : 0.0;
    total += ens.model_weights[i];
  }
  for (auto& w : ens.model_weights) w = total > 0.0 ? w / total : 1.0 / kEnsembleSize;
  ens.validate();
  return record;
}

}  // namespace morph::baseline
