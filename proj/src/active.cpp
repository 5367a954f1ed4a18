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

#include "morph/active.hpp"

#include <algorithm>
#include <numeric>

#include "morph/errors.hpp"
#include "morph/random.hpp"

namespace morph::active {
namespace {

struct NamedSchedule {
  Schedule schedule;
  std::string_view name;
};

constexpr NamedSchedule kSchedules[] = {
    {Schedule::kStatic, "static"},
    {Schedule::kMorphOnly, "morph_only"},
    {Schedule::kAlEveryMonth, "al_every_month"},
    {Schedule::kAlternate, "alternate_al_and_morph"},
    {Schedule::kAlPlusMorphResidual, "al_plus_morph_residual"},
};

void add_annotations(adapt::AdaptationState& state, const data::MonthBatch& batch,
                     const AnnotationEvent& event) {
  for (std::size_t k = 0; k < event.indices.size(); ++k) {
    data::Sample s = batch.samples[event.indices[k]];
    s.label = event.labels[k];
    state.labeled_pool.push_back(std::move(s));
  }
  state.history.back().annotations_used = static_cast<int>(event.indices.size());
}

}  // namespace

std::string_view schedule_name(Schedule s) {
  for (const auto& n : kSchedules) {
    if (n.schedule == s) return n.name;
  }
  return "unknown";
}

Schedule parse_schedule(std::string_view name) {
  for (const auto& n : kSchedules) {
    if (n.name == name) return n.schedule;
  }
  throw ConfigError("unknown schedule '" + std::string(name) + "'");
}

bool uses_annotation(Schedule s) {
  return s == Schedule::kAlEveryMonth || s == Schedule::kAlternate ||
         s == Schedule::kAlPlusMorphResidual;
}

bool uses_pseudo_labels(Schedule s) {
  return s == Schedule::kMorphOnly || s == Schedule::kAlternate ||
         s == Schedule::kAlPlusMorphResidual;
}

void ALConfig::validate() const {
  if (uses_annotation(schedule) && budget_per_update < 1) {
    throw ConfigError("budget_per_update must be >= 1");
  }
}

std::vector<std::size_t> select_uncertain(const nn::Matrix& probs, int budget) {
  if (budget < 1) throw ConfigError("annotation budget must be >= 1");
  std::vector<std::size_t> order(static_cast<std::size_t>(probs.rows()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (order.size() <= static_cast<std::size_t>(budget)) return order;
  std::vector<double> max_prob(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    max_prob[i] = probs.row(static_cast<Eigen::Index>(i)).maxCoeff();
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return max_prob[a] < max_prob[b]; });
  order.resize(static_cast<std::size_t>(budget));
  std::sort(order.begin(), order.end());
  return order;
}

AnnotationEvent annotate(const data::MonthBatch& batch, std::vector<std::size_t> indices) {
  AnnotationEvent event;
  event.month = batch.month;
  event.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= batch.samples.size()) throw ShapeError("annotation index out of range");
    const auto& s = batch.samples[i];
    if (!s.label) throw InputError("cannot annotate a sample without ground truth");
    event.labels.push_back(*s.label);
  }
  event.indices = std::move(indices);
  return event;
}

ScheduleResult run_schedule(adapt::AdaptationState& state, std::span<const data::MonthBatch> months,
                            const ALConfig& al, const adapt::MorphConfig& morph, std::uint64_t seed) {
  al.validate();
  if (uses_pseudo_labels(al.schedule) || uses_annotation(al.schedule)) morph.validate();
  ScheduleResult result;
  for (std::size_t i = 0; i < months.size(); ++i) {
    const auto& batch = months[i];
    const std::uint64_t month_seed = derive_seed(seed, static_cast<std::uint64_t>(batch.month));
    Schedule step = al.schedule;
    if (step == Schedule::kAlternate) {
      step = i % 2 == 0 ? Schedule::kAlEveryMonth : Schedule::kMorphOnly;
    }
    switch (step) {
      case Schedule::kStatic:
        adapt::evaluate_month(state, batch);
        break;
      case Schedule::kMorphOnly:
        adapt::adapt_month(state, batch, morph, month_seed);
        break;
      case Schedule::kAlEveryMonth: {
        const nn::Matrix probs = adapt::evaluate_month(state, batch);
        auto event = annotate(batch, select_uncertain(probs, al.budget_per_update));
        add_annotations(state, batch, event);
        result.annotations.push_back(std::move(event));
        adapt::fine_tune(state, batch, adapt::PseudoLabelSet{}, 0.0, morph.fine_tune_epochs,
                         derive_seed(month_seed, SeedStream::kFineTune));
        break;
      }
      case Schedule::kAlPlusMorphResidual: {
        const nn::Matrix probs = adapt::evaluate_month(state, batch);
        auto event = annotate(batch, select_uncertain(probs, al.budget_per_update));
        add_annotations(state, batch, event);
        std::vector<bool> taken(batch.size(), false);
        for (std::size_t idx : event.indices) taken[idx] = true;
        std::vector<std::size_t> residual;
        for (std::size_t r = 0; r < batch.size(); ++r) {
          if (!taken[r]) residual.push_back(r);
        }
        const auto picks = adapt::select_samples(
            probs, residual, morph, derive_seed(month_seed, SeedStream::kSelection), batch.month);
        state.history.back().pseudo_malware = static_cast<int>(picks.malware.size());
        state.history.back().pseudo_benign = static_cast<int>(picks.benign.size());
        result.annotations.push_back(std::move(event));
        adapt::fine_tune(state, batch, picks, morph.lambda_u, morph.fine_tune_epochs,
                         derive_seed(month_seed, SeedStream::kFineTune));
        break;
      }
      case Schedule::kAlternate:
        throw InvariantError("alternate schedule was not resolved to a step");
    }
  }
  result.history = state.history;
  return result;
}

}  // namespace morph::active
