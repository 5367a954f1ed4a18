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

#include "morph/gradcheck.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "morph/errors.hpp"
#include "morph/random.hpp"

namespace morph::nn {
namespace {

double loss_at(const Mlp& model, const TrainBatch& batch) {
  return loss_and_grad(model, batch, 0).loss;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

void probe_block(Mlp& probe, const TrainBatch& batch, double* params, const double* analytic,
                 Eigen::Index size, double h, GradCheckResult& out) {
  for (Eigen::Index i = 0; i < size; ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = loss_at(probe, batch);
    params[i] = saved - h;
    const double down = loss_at(probe, batch);
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    out.max_relative_error = std::max(out.max_relative_error, relative_error(analytic[i], numeric));
    ++out.components;
  }
}

}  // namespace

GradCheckResult check_gradients(const Mlp& model, const TrainBatch& batch, double h) {
  if (model.dropout_rate != 0.0) throw ConfigError("gradient check requires dropout 0");
  const Gradients grad = loss_and_grad(model, batch, 0).grad;
  Mlp probe = model;
  GradCheckResult out;
  for (std::size_t k = 0; k < probe.num_layers(); ++k) {
    probe_block(probe, batch, probe.weights[k].data(), grad.weights[k].data(),
                probe.weights[k].size(), h, out);
    probe_block(probe, batch, probe.biases[k].data(), grad.biases[k].data(),
                probe.biases[k].size(), h, out);
  }
  return out;
}

GradCheckSuiteResult run_gradient_check_suite(int models, std::uint64_t seed, double h) {
  GradCheckSuiteResult suite;
  for (int m = 0; m < models; ++m) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(m)));
    const int input = 1 + static_cast<int>(uniform_index(rng, 8));
    const int hidden = 1 + static_cast<int>(uniform_index(rng, 8));
    const int rows = 1 + static_cast<int>(uniform_index(rng, 8));
    const std::array<int, 3> dims = {input, hidden, 2};
    Mlp model = init_model(dims, 0.0, rng());
    // Nonzero biases so the check also exercises the bias path off zero.
    for (auto& b : model.biases) {
      for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = uniform01(rng) - 0.5;
    }
    TrainBatch batch;
    batch.inputs.resize(rows, input);
    for (Eigen::Index i = 0; i < batch.inputs.size(); ++i) {
      batch.inputs.data()[i] = 4.0 * uniform01(rng) - 2.0;
    }
    for (int r = 0; r < rows; ++r) batch.targets.push_back(static_cast<int>(uniform_index(rng, 2)));
    const GradCheckResult r = check_gradients(model, batch, h);
    suite.worst_relative_error = std::max(suite.worst_relative_error, r.max_relative_error);
    ++suite.models;
  }
  return suite;
}

}  // namespace morph::nn
