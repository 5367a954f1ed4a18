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

// Dense feed-forward binary classifier: ReLU hidden layers, two softmax
// outputs, inverted dropout, Adam.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace morph::nn {

// Rows are samples.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct Mlp {
  std::vector<int> layer_dims;  // input, hidden..., 2
  std::vector<Matrix> weights;  // weights[k] is layer_dims[k+1] x layer_dims[k]
  std::vector<Vector> biases;
  double dropout_rate = 0.0;

  int input_dim() const { return layer_dims.front(); }
  std::size_t num_layers() const { return weights.size(); }
  std::size_t num_parameters() const;
  bool all_finite() const;
};

// Throws ConfigError unless dims has >= 2 positive entries ending in 2 and
// dropout is in [0, 1).
void validate_layer_dims(std::span<const int> layer_dims, double dropout_rate);

// Weights ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)), biases zero.
Mlp init_model(std::span<const int> layer_dims, double dropout_rate, std::uint64_t seed);

// Output-layer logits in inference mode (no dropout).
Matrix logits(const Mlp& model, const Matrix& inputs);

// Row-wise softmax with max subtraction.
Matrix softmax(const Matrix& logits);

// Per-class probabilities in inference mode. Throws ShapeError on a column
// mismatch and InputError on non-finite inputs.
Matrix predict_proba(const Mlp& model, const Matrix& inputs);

// Argmax class per row; ties go to class 0.
std::vector<int> predict_labels(const Matrix& probs);

struct TrainBatch {
  Matrix inputs;
  std::vector<int> targets;  // 0 = benign, 1 = malware
  double weight = 1.0;
};

// Parameter-shaped container used for gradients and Adam moments.
struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static Gradients zeros_like(const Mlp& model);
  Gradients& operator+=(const Gradients& other);
  bool same_shape(const Mlp& model) const;
  double max_abs() const;
};

struct LossAndGrad {
  double loss = 0.0;
  Gradients grad;
};

// Mean cross-entropy times batch.weight, with dropout applied after each
// hidden ReLU using a mask drawn from dropout_seed.
LossAndGrad loss_and_grad(const Mlp& model, const TrainBatch& batch, std::uint64_t dropout_seed);

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamOptions options;
  Gradients first_moment;
  Gradients second_moment;
  std::int64_t step_count = 0;

  static AdamState for_model(const Mlp& model, AdamOptions options = {});
};

// One bias-corrected Adam update over a flat parameter block. `step` is the
// 1-based step number after increment.
void adam_update(std::span<double> params, std::span<const double> grads,
                 std::span<double> first_moment, std::span<double> second_moment,
                 std::int64_t step, const AdamOptions& options);

void adam_step(Mlp& model, AdamState& state, const Gradients& grads);

struct Dataset {
  Matrix inputs;
  std::vector<int> targets;

  std::size_t size() const { return targets.size(); }
  bool empty() const { return targets.empty(); }
};

struct TrainOptions {
  int epochs = 1;
  int batch_size = 64;
  double lambda_u = 1.0;
  std::uint64_t seed = 0;
  AdamOptions adam;
  // Re-check every parameter after each optimizer step (throws
  // InvariantError on NaN/Inf). Always on in debug builds.
  bool check_finite = false;
};

struct TrainResult {
  std::vector<double> epoch_loss;  // mean combined step loss per epoch
  std::int64_t steps = 0;
};

// One epoch is one pass over `labeled`. With a pseudo set, every step pairs
// a labeled minibatch (weight 1) with an equally sized pseudo minibatch
// (weight lambda_u) drawn from a reshuffled, cycled pseudo pool; the two
// gradients are summed before the Adam step.
TrainResult train(Mlp& model, const Dataset& labeled, const Dataset* pseudo,
                  const TrainOptions& options);

// Same, continuing from an existing optimizer state.
TrainResult train(Mlp& model, AdamState& state, const Dataset& labeled, const Dataset* pseudo,
                  const TrainOptions& options);

// Binary checkpoint: magic, version, layer dims, dropout, raw doubles.
void save_checkpoint(const Mlp& model, const std::filesystem::path& path);
Mlp load_checkpoint(const std::filesystem::path& path);

}  // namespace morph::nn
