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

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "morph/data.hpp"
#include "morph/nn.hpp"

namespace morph::eval {

// Confusion counts for one test month. Malware (label 1) is the positive
// class everywhere.
struct MetricsRecord {
  int month = 0;
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;
  double f1 = 0.0;
  double fpr = 0.0;
  double fnr = 0.0;
  int annotations_used = 0;
  int pseudo_malware = 0;
  int pseudo_benign = 0;

  long total() const { return tp + fp + tn + fn; }
  double accuracy() const;

  bool operator==(const MetricsRecord&) const = default;
};

// F1 = 2TP/(2TP+FP+FN), FPR = FP/(FP+TN), FNR = FN/(FN+TP); an empty
// denominator yields 0. Throws InputError on a length mismatch or a label
// outside {0, 1}.
MetricsRecord compute_metrics(std::span<const int> predictions, std::span<const int> truths,
                              int month = 0);

// Recomputes f1/fpr/fnr from the counts already in `record`.
void derive_rates(MetricsRecord& record);

struct ConfidenceRow {
  int month = 0;
  double max_prob = 0.0;
  bool correct = false;
  int true_label = 0;
  int pred_label = 0;

  bool operator==(const ConfidenceRow&) const = default;
};

using ConfidenceExport = std::vector<ConfidenceRow>;

// One row per sample; probs rows align with samples.
ConfidenceExport export_confidence(const nn::Matrix& probs, std::span<const data::Sample> samples);
ConfidenceExport export_confidence(const nn::Mlp& model, std::span<const data::Sample> samples);

struct Summary {
  std::size_t months = 0;
  double mean_f1 = 0.0;
  double mean_fpr = 0.0;
  double mean_fnr = 0.0;
  double mean_accuracy = 0.0;
  // run - reference; present when summarized against a reference run.
  std::optional<double> delta_f1;
  std::optional<double> delta_fpr;
  std::optional<double> delta_fnr;
};

// Unweighted means over months. Throws InputError on an empty history or
// when the reference covers different months.
Summary summarize(std::span<const MetricsRecord> history);
Summary summarize(std::span<const MetricsRecord> history, std::span<const MetricsRecord> reference);

void write_metrics_csv(std::ostream& out, std::span<const MetricsRecord> history);
std::vector<MetricsRecord> read_metrics_csv(std::istream& in);

void write_confidence_csv(std::ostream& out, std::span<const ConfidenceRow> rows);

// Shortest decimal that parses back to the same double.
std::string format_real(double v);

}  // namespace morph::eval
