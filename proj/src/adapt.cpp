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

#include "morph/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "morph/errors.hpp"
#include "morph/random.hpp"

namespace morph::adapt {
namespace {

void check_distribution_rows(const nn::Matrix& probs) {
  if (probs.cols() != 2) throw ShapeError("expected two class probabilities per row");
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const double a = probs(i, 0);
    const double b = probs(i, 1);
    if (!std::isfinite(a) || !std::isfinite(b) || a < 0.0 || b < 0.0 ||
        std::abs(a + b - 1.0) > 1e-6) {
      throw InputError("row " + std::to_string(i) + " is not a probability distribution");
    }
  }
}

nn::Dataset pseudo_dataset(const data::MonthBatch& batch, const PseudoLabelSet& pseudo) {
  std::vector<data::Sample> rows;
  rows.reserve(pseudo.size());
  auto add = [&](const Pick& p, int label) {
    data::Sample s;
    s.features = batch.samples.at(p.index).features;
    s.label = label;
    rows.push_back(std::move(s));
  };
  for (const auto& p : pseudo.malware) add(p, data::kMalware);
  for (const auto& p : pseudo.benign) add(p, data::kBenign);
  return data::to_dataset(rows);
}

}  // namespace

void MorphConfig::validate() const {
  if (!(tau_m > 0.5 && tau_m < 1.0)) throw ConfigError("tau_m must be in (0.5, 1)");
  if (tau_b) {
    if (!(*tau_b > 0.5 && *tau_b <= 1.0)) throw ConfigError("tau_b must be in (0.5, 1]");
    if (!(tau_m < *tau_b)) throw ConfigError("tau_m must be smaller than tau_b");
  }
  if (n_m_cap && *n_m_cap < 1) throw ConfigError("n_m_cap must be >= 1");
  if (!(lambda_u >= 0.0) || !std::isfinite(lambda_u)) throw ConfigError("lambda_u must be >= 0");
  if (fine_tune_epochs < 1) throw ConfigError("fine_tune_epochs must be >= 1");
}

std::vector<std::optional<int>> pseudo_label(const nn::Matrix& probs, double tau) {
  if (!(tau > 0.5 && tau <= 1.0)) throw ConfigError("tau must be in (0.5, 1]");
  check_distribution_rows(probs);
  std::vector<std::optional<int>> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const int cls = probs(i, 1) > probs(i, 0) ? 1 : 0;
    if (probs(i, cls) >= tau) out[static_cast<std::size_t>(i)] = cls;
  }
  return out;
}

PseudoLabelSet select_samples(const nn::Matrix& probs, const MorphConfig& config,
                              std::uint64_t seed, int month) {
  std::vector<std::size_t> all(static_cast<std::size_t>(probs.rows()));
  std::iota(all.begin(), all.end(), std::size_t{0});
  return select_samples(probs, all, config, seed, month);
}

PseudoLabelSet select_samples(const nn::Matrix& probs, std::span<const std::size_t> candidates,
                              const MorphConfig& config, std::uint64_t seed, int month) {
  config.validate();
  check_distribution_rows(probs);
  std::vector<Pick> malware;
  std::vector<Pick> benign;
  for (std::size_t idx : candidates) {
    if (idx >= static_cast<std::size_t>(probs.rows())) throw ShapeError("candidate index out of range");
    const auto r = static_cast<Eigen::Index>(idx);
    if (probs(r, 1) > probs(r, 0)) {
      if (probs(r, 1) > config.tau_m) malware.push_back({idx, probs(r, 1)});
    } else if (!config.tau_b || probs(r, 0) > *config.tau_b) {
      benign.push_back({idx, probs(r, 0)});
    }
  }

  std::size_t n = malware.size();
  if (config.n_m_cap) n = std::min(n, static_cast<std::size_t>(*config.n_m_cap));
  n = std::min(n, benign.size());

  PseudoLabelSet out;
  out.month = month;
  // Partial Fisher-Yates: the first n entries become a uniform n-subset.
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = i + uniform_index(rng, malware.size() - i);
    std::swap(malware[i], malware[j]);
  }
  out.malware.assign(malware.begin(), malware.begin() + static_cast<std::ptrdiff_t>(n));
  std::sort(out.malware.begin(), out.malware.end(),
            [](const Pick& a, const Pick& b) { return a.index < b.index; });

  std::stable_sort(benign.begin(), benign.end(), [](const Pick& a, const Pick& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.index < b.index;
  });
  out.benign.assign(benign.begin(), benign.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

AdaptationState AdaptationState::start(nn::Mlp model, std::vector<data::Sample> train,
                                       FineTuneOptions options) {
  if (train.empty()) throw InputError("adaptation needs a non-empty training set");
  AdaptationState s;
  s.model = std::move(model);
  s.original_train_size = train.size();
  s.labeled_pool = std::move(train);
  s.fine_tune = options;
  return s;
}

nn::Matrix evaluate_month(AdaptationState& state, const data::MonthBatch& batch) {
  if (state.last_month && batch.month <= *state.last_month) {
    throw SequenceError("month " + std::to_string(batch.month) + " does not follow month " +
                        std::to_string(*state.last_month));
  }
  if (batch.samples.empty()) throw InputError("empty month batch");
  nn::Matrix probs = nn::predict_proba(state.model, data::feature_matrix(batch.samples));
  const std::vector<int> predicted = nn::predict_labels(probs);
  std::vector<int> truth;
  truth.reserve(batch.samples.size());
  for (const auto& s : batch.samples) {
    if (!s.label) throw InputError("test sample without ground truth");
    truth.push_back(*s.label);
  }
  state.history.push_back(eval::compute_metrics(predicted, truth, batch.month));
  const auto rows = eval::export_confidence(probs, batch.samples);
  state.confidence.insert(state.confidence.end(), rows.begin(), rows.end());
  state.last_month = batch.month;
  return probs;
}

void fine_tune(AdaptationState& state, const data::MonthBatch& batch, const PseudoLabelSet& pseudo,
               double lambda_u, int epochs, std::uint64_t seed) {
  const nn::Dataset labeled = data::to_dataset(state.labeled_pool);
  nn::TrainOptions options;
  options.epochs = epochs;
  options.batch_size = state.fine_tune.batch_size;
  options.lambda_u = lambda_u;
  options.seed = seed;
  options.adam = state.fine_tune.adam;
  if (pseudo.empty()) {
    nn::train(state.model, labeled, nullptr, options);
  } else {
    const nn::Dataset pseudo_set = pseudo_dataset(batch, pseudo);
    nn::train(state.model, labeled, &pseudo_set, options);
  }
}

void adapt_month(AdaptationState& state, const data::MonthBatch& batch, const MorphConfig& config,
                 std::uint64_t seed) {
  config.validate();
  const nn::Matrix probs = evaluate_month(state, batch);
  const PseudoLabelSet picks =
      select_samples(probs, config, derive_seed(seed, SeedStream::kSelection), batch.month);
  state.history.back().pseudo_malware = static_cast<int>(picks.malware.size());
  state.history.back().pseudo_benign = static_cast<int>(picks.benign.size());
  fine_tune(state, batch, picks, config.lambda_u, config.fine_tune_epochs,
            derive_seed(seed, SeedStream::kFineTune));
}

}  // namespace morph::adapt
