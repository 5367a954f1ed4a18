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

#include "morph/nn.hpp"

namespace morph::nn {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t components = 0;
};

// Compares loss_and_grad's analytic gradient with central differences of
// the loss, component by component. Relative error is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6); dropout must be 0.
GradCheckResult check_gradients(const Mlp& model, const TrainBatch& batch, double h = 1e-5);

struct GradCheckSuiteResult {
  int models = 0;
  double worst_relative_error = 0.0;
};

// Random models with layer dims <= [8, 8, 2] and batches of 1..8 samples.
GradCheckSuiteResult run_gradient_check_suite(int models, std::uint64_t seed, double h = 1e-5);

}  // namespace morph::nn
