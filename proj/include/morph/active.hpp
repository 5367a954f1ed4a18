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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "morph/adapt.hpp"
#include "morph/data.hpp"

namespace morph::active {

enum class Schedule {
  kStatic,              // evaluate only
  kMorphOnly,           // pseudo-label adaptation every month
  kAlEveryMonth,        // annotate budget, supervised fine-tune
  kAlternate,           // AL on the 1st, 3rd, ... test month, MORPH on the rest
  kAlPlusMorphResidual  // annotate, then MORPH on the unannotated remainder
};

std::string_view schedule_name(Schedule s);
Schedule parse_schedule(std::string_view name);
bool uses_annotation(Schedule s);
bool uses_pseudo_labels(Schedule s);

struct ALConfig {
  int budget_per_update = 100;
  Schedule schedule = Schedule::kStatic;

  void validate() const;
};

struct AnnotationEvent {
  int month = 0;
  std::vector<std::size_t> indices;
  std::vector<int> labels;
};

// Indices of the `budget` rows with the smallest max-class probability,
// ties by ascending index, returned in ascending index order. All indices
// when the batch is not larger than the budget.
std::vector<std::size_t> select_uncertain(const nn::Matrix& probs, int budget);

// Reveals ground truth for exactly the selected rows.
AnnotationEvent annotate(const data::MonthBatch& batch, std::vector<std::size_t> indices);

struct ScheduleResult {
  std::vector<eval::MetricsRecord> history;
  std::vector<AnnotationEvent> annotations;
};

// Replays the months in order. Every month is evaluated before the model
// is touched; annotated samples join state.labeled_pool permanently.
ScheduleResult run_schedule(adapt::AdaptationState& state, std::span<const data::MonthBatch> months,
                            const ALConfig& al, const adapt::MorphConfig& morph, std::uint64_t seed);

}  // namespace morph::active
