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
#include <exception>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "morph/active.hpp"
#include "morph/adapt.hpp"
#include "morph/baseline.hpp"
#include "morph/data.hpp"
#include "morph/metrics.hpp"
#include "morph/synthetic.hpp"

namespace morph::runner {

enum class Scenario {
  kStatic,
  kMorph,
  kAlMonthly,
  kAlAlternate,
  kAlPlusMorph,
  kDeBaseline,
  kDeBaselineStatic,
};

std::string_view scenario_name(Scenario s);
Scenario parse_scenario(std::string_view name);
// Scenarios that self-train on pseudo-labels and therefore need tau_m.
bool needs_tau_m(Scenario s);

struct ModelConfig {
  std::vector<int> hidden = {512, 384, 256, 128};
  double dropout = 0.2;
  int max_epochs = 200;  // initial training, early-stopped on dev F1
  int patience = 10;
  int batch_size = 64;
  double learning_rate = 1e-3;
};

struct DataSource {
  // Either a stream file ...
  std::optional<std::filesystem::path> path;
  std::optional<data::Format> format;
  // ... or a synthetic stream.
  std::string synthetic_preset = "default";
  data::SyntheticConfig synthetic;
  std::optional<std::uint64_t> synthetic_seed;  // default: derived from the root seed
};

struct ExperimentConfig {
  DataSource data;
  Scenario scenario = Scenario::kStatic;
  std::optional<int> family_top_k;
  std::optional<adapt::MorphConfig> morph;
  int annotation_budget = 100;
  ModelConfig model;
  baseline::DEOptions baseline;
  std::optional<std::uint64_t> seed;
  std::filesystem::path output_dir;

  // Throws ConfigError naming the offending or missing field.
  void validate() const;

  // JSON round trip; parse validates. The echo carries every resolved default, so parsing it
  // back reproduces the run exactly.
  static ExperimentConfig parse(std::string_view json_text);
  std::string echo() const;

  std::uint64_t root_seed() const;
  std::uint64_t stream_seed() const;
  adapt::MorphConfig morph_or_default() const;
  active::Schedule schedule() const;
};

struct RunResult {
  std::vector<eval::MetricsRecord> history;
  std::vector<active::AnnotationEvent> annotations;
  eval::ConfidenceExport confidence;
  std::optional<nn::Mlp> model;  // absent for the linear baseline
  int initial_epochs = 0;
};

// Loads or generates the stream, applies the family limit, standardizes on
// the training split, trains the initial model and replays the test months.
RunResult run_experiment(const ExperimentConfig& config);
// Same, on an already loaded (unstandardized) stream.
RunResult run_experiment(const ExperimentConfig& config, const data::DriftStream& stream);

data::DriftStream load_source(const ExperimentConfig& config);

// Initial training: one epoch at a time, keeping the parameters with the best
// F1 on `selection` and stopping after `patience` epochs without improvement.
nn::Mlp train_initial(const data::DriftStream& stream, const ModelConfig& model,
                      std::uint64_t seed, int* epochs_run = nullptr);

// metrics.csv, confidence.csv, annotations.csv, summary.json, config.json and
// model.ckpt (when there is a model).
void write_artifacts(const ExperimentConfig& config, const RunResult& result,
                     const std::filesystem::path& dir);

struct Comparison {
  std::string csv;
  std::vector<std::string> warnings;
};

// Aligns the runs' metrics by month; the first directory is the reference.
// Throws InputError when the runs cover different months.
Comparison compare_runs(std::span<const std::filesystem::path> run_dirs);

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitData = 3,
  kExitInternal = 4,
};

int exit_code_for(const std::exception& e);

}  // namespace morph::runner
