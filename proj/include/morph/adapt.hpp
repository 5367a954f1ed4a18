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

// Monthly pseudo-label self-training: thresholded labeling, asymmetric
// malware/benign sample selection, and semi-supervised fine-tuning.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "morph/data.hpp"
#include "morph/metrics.hpp"
#include "morph/nn.hpp"

namespace morph::adapt {

struct MorphConfig {
  double tau_m = 0.6;             // malware confidence floor, in (0.5, 1)
  std::optional<double> tau_b;    // benign floor, in (0.5, 1]; must exceed tau_m
  std::optional<int> n_m_cap;     // cap on picks per class; none = all eligible
  double lambda_u = 1.0;          // pseudo-loss weight
  int fine_tune_epochs = 10;

  // Throws ConfigError.
  void validate() const;
};

// Class whose probability is >= tau, or nullopt when no class reaches it.
// Throws ConfigError for tau outside (0.5, 1] and InputError for rows that
// are not probability distributions.
std::vector<std::optional<int>> pseudo_label(const nn::Matrix& probs, double tau);

struct Pick {
  std::size_t index = 0;  // row in the month batch
  double confidence = 0.0;

  bool operator==(const Pick&) const = default;
};

struct PseudoLabelSet {
  int month = 0;
  std::vector<Pick> malware;  // ascending index
  std::vector<Pick> benign;   // descending confidence

  std::size_t size() const { return malware.size() + benign.size(); }
  bool empty() const { return malware.empty() && benign.empty(); }
};

// Predicted malware with confidence > tau_m is eligible; N = min(eligible,
// n_m_cap) picks are drawn uniformly at random. The benign side takes the N
// most confident predicted-benign rows (> tau_b when set; ties by index).
// If fewer benign rows qualify, both sides shrink to that count.
PseudoLabelSet select_samples(const nn::Matrix& probs, const MorphConfig& config,
                              std::uint64_t seed, int month = 0);

// Same, considering only the listed rows (e.g. those left unannotated).
PseudoLabelSet select_samples(const nn::Matrix& probs, std::span<const std::size_t> candidates,
                              const MorphConfig& config, std::uint64_t seed, int month = 0);

struct FineTuneOptions {
  int batch_size = 64;
  nn::AdamOptions adam;
};

// Per-experiment adaptation state. labeled_pool always begins with the full
// original training set; ground-truth annotations are appended after it.
struct AdaptationState {
  nn::Mlp model;
  std::vector<data::Sample> labeled_pool;
  std::size_t original_train_size = 0;
  std::vector<eval::MetricsRecord> history;
  eval::ConfidenceExport confidence;
  std::optional<int> last_month;
  FineTuneOptions fine_tune;

  static AdaptationState start(nn::Mlp model, std::vector<data::Sample> train,
                               FineTuneOptions options = {});
};

// Scores the batch with the current model (before any update), appends the
// month's MetricsRecord and confidence rows, and returns the class
// probabilities. Throws SequenceError unless the month follows the last one.
nn::Matrix evaluate_month(AdaptationState& state, const data::MonthBatch& batch);

// Fine-tunes the current model on labeled_pool, pairing each step with the
// pseudo-labeled rows of `batch` when `pseudo` is non-empty.
void fine_tune(AdaptationState& state, const data::MonthBatch& batch, const PseudoLabelSet& pseudo,
               double lambda_u, int epochs, std::uint64_t seed);

// evaluate_month, select_samples, fine_tune. Pseudo-labels are not kept
// beyond the month.
void adapt_month(AdaptationState& state, const data::MonthBatch& batch, const MorphConfig& config,
                 std::uint64_t seed);

}  // namespace morph::adapt
