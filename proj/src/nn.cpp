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

#include "morph/nn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "morph/errors.hpp"
#include "morph/random.hpp"

namespace morph::nn {
namespace {

struct ForwardCache {
  // activations[0] is the input; activations[k] feeds layer k.
  std::vector<Matrix> activations;
  std::vector<Matrix> pre_relu;  // hidden pre-activations
  std::vector<Matrix> masks;     // scaled dropout masks, empty when off
  Matrix output_logits;
};

Matrix affine(const Matrix& a, const Matrix& w, const Vector& b) {
  Matrix z = a * w.transpose();
  z.rowwise() += b.transpose();
  return z;
}

ForwardCache forward(const Mlp& model, const Matrix& inputs, bool train, std::uint64_t seed) {
  ForwardCache cache;
  const std::size_t layers = model.num_layers();
  const bool use_dropout = train && model.dropout_rate > 0.0;
  const double keep_scale = use_dropout ? 1.0 / (1.0 - model.dropout_rate) : 1.0;
  Rng rng(seed);
  cache.activations.reserve(layers);
  cache.activations.push_back(inputs);
  for (std::size_t k = 0; k + 1 < layers; ++k) {
    Matrix z = affine(cache.activations.back(), model.weights[k], model.biases[k]);
    Matrix h = z.cwiseMax(0.0);
    if (use_dropout) {
      Matrix mask(h.rows(), h.cols());
      for (Eigen::Index i = 0; i < mask.size(); ++i) {
        mask.data()[i] = uniform01(rng) >= model.dropout_rate ? keep_scale : 0.0;
      }
      h.array() *= mask.array();
      cache.masks.push_back(std::move(mask));
    }
    cache.pre_relu.push_back(std::move(z));
    cache.activations.push_back(std::move(h));
  }
  cache.output_logits = affine(cache.activations.back(), model.weights.back(), model.biases.back());
  return cache;
}

void check_inputs(const Mlp& model, const Matrix& inputs) {
  if (inputs.cols() != model.input_dim()) {
    throw ShapeError("input has " + std::to_string(inputs.cols()) + " columns, model expects " +
                     std::to_string(model.input_dim()));
  }
  if (!inputs.allFinite()) throw InputError("non-finite value in model inputs");
}

template <typename Fn>
void for_each_block(Mlp& model, Gradients& a, Gradients& b, const Gradients& g, Fn&& fn) {
  for (std::size_t k = 0; k < model.num_layers(); ++k) {
    fn(std::span<double>(model.weights[k].data(), model.weights[k].size()),
       std::span<const double>(g.weights[k].data(), g.weights[k].size()),
       std::span<double>(a.weights[k].data(), a.weights[k].size()),
       std::span<double>(b.weights[k].data(), b.weights[k].size()));
    fn(std::span<double>(model.biases[k].data(), model.biases[k].size()),
       std::span<const double>(g.biases[k].data(), g.biases[k].size()),
       std::span<double>(a.biases[k].data(), a.biases[k].size()),
       std::span<double>(b.biases[k].data(), b.biases[k].size()));
  }
}

TrainBatch gather(const Dataset& data, std::span<const std::size_t> rows, double weight) {
  TrainBatch batch;
  batch.inputs.resize(static_cast<Eigen::Index>(rows.size()), data.inputs.cols());
  batch.targets.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    batch.inputs.row(static_cast<Eigen::Index>(r)) = data.inputs.row(static_cast<Eigen::Index>(rows[r]));
    batch.targets.push_back(data.targets[rows[r]]);
  }
  batch.weight = weight;
  return batch;
}

void check_dataset(const Dataset& data, int input_dim, const char* name) {
  if (data.inputs.rows() != static_cast<Eigen::Index>(data.targets.size())) {
    throw ShapeError(std::string(name) + " set: row count differs from target count");
  }
  if (data.inputs.cols() != input_dim) {
    throw ShapeError(std::string(name) + " set: wrong feature dimension");
  }
}

constexpr std::array<char, 8> kCheckpointMagic = {'M', 'O', 'R', 'P', 'H', 'N', 'N', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw InputError("truncated checkpoint");
  return value;
}

}  // namespace

std::size_t Mlp::num_parameters() const {
  std::size_t n = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    n += static_cast<std::size_t>(weights[k].size() + biases[k].size());
  }
  return n;
}

bool Mlp::all_finite() const {
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (!weights[k].allFinite() || !biases[k].allFinite()) return false;
  }
  return true;
}

void validate_layer_dims(std::span<const int> layer_dims, double dropout_rate) {
  if (layer_dims.size() < 2) throw ConfigError("layer_dims needs at least 2 entries");
  for (int d : layer_dims) {
    if (d < 1) throw ConfigError("layer_dims entries must be positive");
  }
  if (layer_dims.back() != 2) throw ConfigError("last layer_dims entry must be 2");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError("dropout_rate must be in [0, 1)");
  }
}

Mlp init_model(std::span<const int> layer_dims, double dropout_rate, std::uint64_t seed) {
  validate_layer_dims(layer_dims, dropout_rate);
  Mlp model;
  model.layer_dims.assign(layer_dims.begin(), layer_dims.end());
  model.dropout_rate = dropout_rate;
  Rng rng(seed);
  for (std::size_t k = 0; k + 1 < layer_dims.size(); ++k) {
    const int fan_in = layer_dims[k];
    const double limit = std::sqrt(6.0 / fan_in);
    Matrix w(layer_dims[k + 1], fan_in);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      w.data()[i] = (2.0 * uniform01(rng) - 1.0) * limit;
    }
    model.weights.push_back(std::move(w));
    model.biases.push_back(Vector::Zero(layer_dims[k + 1]));
  }
  return model;
}

Matrix logits(const Mlp& model, const Matrix& inputs) {
  check_inputs(model, inputs);
  return forward(model, inputs, false, 0).output_logits;
}

Matrix softmax(const Matrix& z) {
  Matrix p(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    p.row(i) = (z.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

Matrix predict_proba(const Mlp& model, const Matrix& inputs) {
  return softmax(logits(model, inputs));
}

std::vector<int> predict_labels(const Matrix& probs) {
  std::vector<int> labels(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    labels[static_cast<std::size_t>(i)] = probs(i, 1) > probs(i, 0) ? 1 : 0;
  }
  return labels;
}

Gradients Gradients::zeros_like(const Mlp& model) {
  Gradients g;
  for (std::size_t k = 0; k < model.num_layers(); ++k) {
    g.weights.push_back(Matrix::Zero(model.weights[k].rows(), model.weights[k].cols()));
    g.biases.push_back(Vector::Zero(model.biases[k].size()));
  }
  return g;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  if (other.weights.size() != weights.size()) throw ShapeError("gradient layer count mismatch");
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k].rows() != other.weights[k].rows() ||
        weights[k].cols() != other.weights[k].cols() ||
        biases[k].size() != other.biases[k].size()) {
      throw ShapeError("gradient shape mismatch at layer " + std::to_string(k));
    }
    weights[k] += other.weights[k];
    biases[k] += other.biases[k];
  }
  return *this;
}

bool Gradients::same_shape(const Mlp& model) const {
  if (weights.size() != model.num_layers() || biases.size() != model.num_layers()) return false;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k].rows() != model.weights[k].rows() ||
        weights[k].cols() != model.weights[k].cols() ||
        biases[k].size() != model.biases[k].size()) {
      return false;
    }
  }
  return true;
}

double Gradients::max_abs() const {
  double m = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k].size() > 0) m = std::max(m, weights[k].cwiseAbs().maxCoeff());
    if (biases[k].size() > 0) m = std::max(m, biases[k].cwiseAbs().maxCoeff());
  }
  return m;
}

LossAndGrad loss_and_grad(const Mlp& model, const TrainBatch& batch, std::uint64_t dropout_seed) {
  if (batch.targets.empty()) throw InputError("empty training batch");
  if (batch.inputs.rows() != static_cast<Eigen::Index>(batch.targets.size())) {
    throw ShapeError("batch inputs and targets differ in length");
  }
  check_inputs(model, batch.inputs);

  const ForwardCache cache = forward(model, batch.inputs, true, dropout_seed);
  const Matrix& z = cache.output_logits;
  const auto n = static_cast<double>(batch.targets.size());

  // Cross-entropy through log-sum-exp; dZ = (softmax - onehot) * weight / n.
  double loss_sum = 0.0;
  Matrix dz(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const int t = batch.targets[static_cast<std::size_t>(i)];
    if (t != 0 && t != 1) throw InputError("target class must be 0 or 1");
    const double m = z.row(i).maxCoeff();
    const double lse = m + std::log((z.row(i).array() - m).exp().sum());
    loss_sum += lse - z(i, t);
    dz.row(i) = (z.row(i).array() - lse).exp();
    dz(i, t) -= 1.0;
  }
  dz *= batch.weight / n;

  LossAndGrad out;
  out.loss = batch.weight * (loss_sum / n);
  out.grad = Gradients::zeros_like(model);
  for (std::size_t k = model.num_layers(); k-- > 0;) {
    out.grad.weights[k].noalias() = dz.transpose() * cache.activations[k];
    out.grad.biases[k] = dz.colwise().sum().transpose();
    if (k == 0) break;
    Matrix da = dz * model.weights[k];
    if (!cache.masks.empty()) da.array() *= cache.masks[k - 1].array();
    da.array() *= (cache.pre_relu[k - 1].array() > 0.0).cast<double>();
    dz = std::move(da);
  }
  return out;
}

AdamState AdamState::for_model(const Mlp& model, AdamOptions options) {
  AdamState s;
  s.options = options;
  s.first_moment = Gradients::zeros_like(model);
  s.second_moment = Gradients::zeros_like(model);
  return s;
}

void adam_update(std::span<double> params, std::span<const double> grads,
                 std::span<double> first_moment, std::span<double> second_moment,
                 std::int64_t step, const AdamOptions& o) {
  if (grads.size() != params.size() || first_moment.size() != params.size() ||
      second_moment.size() != params.size()) {
    throw ShapeError("adam: parameter block size mismatch");
  }
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    first_moment[i] = o.beta1 * first_moment[i] + (1.0 - o.beta1) * g;
    second_moment[i] = o.beta2 * second_moment[i] + (1.0 - o.beta2) * g * g;
    const double m_hat = first_moment[i] / c1;
    const double v_hat = second_moment[i] / c2;
    params[i] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
  }
}

void adam_step(Mlp& model, AdamState& state, const Gradients& grads) {
  if (!grads.same_shape(model)) throw ShapeError("adam: gradients do not match model shape");
  if (!state.first_moment.same_shape(model) || !state.second_moment.same_shape(model)) {
    throw ShapeError("adam: optimizer state does not match model shape");
  }
  const std::int64_t step = ++state.step_count;
  for_each_block(model, state.first_moment, state.second_moment, grads,
                 [&](std::span<double> p, std::span<const double> g, std::span<double> m,
                     std::span<double> v) { adam_update(p, g, m, v, step, state.options); });
}

TrainResult train(Mlp& model, const Dataset& labeled, const Dataset* pseudo,
                  const TrainOptions& options) {
  AdamState state = AdamState::for_model(model, options.adam);
  return train(model, state, labeled, pseudo, options);
}

TrainResult train(Mlp& model, AdamState& state, const Dataset& labeled, const Dataset* pseudo,
                  const TrainOptions& options) {
  if (options.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (options.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (labeled.empty()) throw InputError("labeled training set is empty");
  check_dataset(labeled, model.input_dim(), "labeled");
  if (pseudo != nullptr) {
    if (pseudo->empty()) throw InputError("pseudo-label set is empty");
    check_dataset(*pseudo, model.input_dim(), "pseudo");
  }
#ifndef NDEBUG
  const bool check_finite = true;
#else
  const bool check_finite = options.check_finite;
#endif

  Rng labeled_rng(derive_seed(options.seed, 1));
  Rng pseudo_rng(derive_seed(options.seed, 2));
  std::vector<std::size_t> order(labeled.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::size_t> pseudo_order;
  std::size_t pseudo_cursor = 0;
  if (pseudo != nullptr) {
    pseudo_order.resize(pseudo->size());
    std::iota(pseudo_order.begin(), pseudo_order.end(), std::size_t{0});
    shuffle(pseudo_order, pseudo_rng);
  }

  const auto batch_size = static_cast<std::size_t>(options.batch_size);
  TrainResult result;
  std::vector<std::size_t> pseudo_rows;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    shuffle(order, labeled_rng);
    double epoch_loss = 0.0;
    std::size_t epoch_steps = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t count = std::min(batch_size, order.size() - start);
      const auto step = static_cast<std::uint64_t>(result.steps);
      const TrainBatch batch =
          gather(labeled, std::span<const std::size_t>(order).subspan(start, count), 1.0);
      LossAndGrad lg =
          loss_and_grad(model, batch, derive_seed(options.seed, SeedStream::kDropout, 2 * step));
      if (pseudo != nullptr) {
        pseudo_rows.clear();
        while (pseudo_rows.size() < count) {
          if (pseudo_cursor == pseudo_order.size()) {
            shuffle(pseudo_order, pseudo_rng);
            pseudo_cursor = 0;
          }
          pseudo_rows.push_back(pseudo_order[pseudo_cursor++]);
        }
        const TrainBatch pbatch = gather(*pseudo, pseudo_rows, options.lambda_u);
        const LossAndGrad plg = loss_and_grad(
            model, pbatch, derive_seed(options.seed, SeedStream::kDropout, 2 * step + 1));
        lg.loss += plg.loss;
        lg.grad += plg.grad;
      }
      adam_step(model, state, lg.grad);
      if (check_finite && !model.all_finite()) {
        throw InvariantError("non-finite parameter after optimizer step " + std::to_string(step));
      }
      epoch_loss += lg.loss;
      ++epoch_steps;
      ++result.steps;
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(epoch_steps));
  }
  return result;
}

void save_checkpoint(const Mlp& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open checkpoint for writing: " + path.string());
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  write_pod(out, kCheckpointVersion);
  write_pod(out, static_cast<std::uint32_t>(model.layer_dims.size()));
  for (int d : model.layer_dims) write_pod(out, static_cast<std::int32_t>(d));
  write_pod(out, model.dropout_rate);
  for (std::size_t k = 0; k < model.num_layers(); ++k) {
    out.write(reinterpret_cast<const char*>(model.weights[k].data()),
              static_cast<std::streamsize>(model.weights[k].size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(model.biases[k].data()),
              static_cast<std::streamsize>(model.biases[k].size() * sizeof(double)));
  }
  if (!out) throw Error("failed writing checkpoint: " + path.string());
}

Mlp load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint: " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kCheckpointMagic) throw InputError("not a model checkpoint: " + path.string());
  if (read_pod<std::uint32_t>(in) != kCheckpointVersion) {
    throw InputError("unsupported checkpoint version");
  }
  const auto count = read_pod<std::uint32_t>(in);
  if (count < 2 || count > 64) throw InputError("corrupt checkpoint header");
  std::vector<int> dims;
  for (std::uint32_t i = 0; i < count; ++i) dims.push_back(read_pod<std::int32_t>(in));
  const auto dropout = read_pod<double>(in);
  validate_layer_dims(dims, dropout);
  Mlp model = init_model(dims, dropout, 0);
  for (std::size_t k = 0; k < model.num_layers(); ++k) {
    in.read(reinterpret_cast<char*>(model.weights[k].data()),
            static_cast<std::streamsize>(model.weights[k].size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(model.biases[k].data()),
            static_cast<std::streamsize>(model.biases[k].size() * sizeof(double)));
  }
  if (!in) throw InputError("truncated checkpoint");
  return model;
}

}  // namespace morph::nn
