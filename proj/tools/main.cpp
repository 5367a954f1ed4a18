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

// morph: command-line front end for drift-adaptation experiments.
//
//   morph run --scenario morph --tau-m 0.6 --seed 1 --out runs/morph
//   morph compare runs/static runs/morph
//   morph gen-synthetic --preset default --seed 42 --out stream.csv
//   morph grad-check
//
// MORPH_VERBOSE=1 prints progress to stderr.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "morph/errors.hpp"
#include "morph/experiment.hpp"
#include "morph/gradcheck.hpp"
#include "morph/synthetic.hpp"

namespace {

using nlohmann::json;
using morph::runner::ExperimentConfig;

struct RunFlags {
  std::string config_path;
  std::optional<std::string> scenario;
  std::optional<std::string> inner_scenario;
  std::optional<int> family_top_k;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> data_path;
  std::optional<std::string> format;
  std::optional<std::string> synthetic;
  std::optional<std::uint64_t> synthetic_seed;
  std::optional<double> tau_m;
  std::optional<double> tau_b;
  std::optional<int> n_m_cap;
  std::optional<double> lambda_u;
  std::optional<int> fine_tune_epochs;
  std::optional<int> budget;
  std::optional<std::vector<int>> hidden;
  std::optional<double> dropout;
  std::optional<int> max_epochs;
  std::optional<int> patience;
  std::optional<int> batch_size;
  std::optional<double> learning_rate;
};

struct GenFlags {
  std::string preset = "default";
  std::uint64_t seed = 0;
  std::string out;
  std::optional<std::string> format;
  std::optional<int> feature_dim;
  std::optional<int> months;
  std::optional<double> rotation_deg;
  std::optional<double> sigma;
  std::optional<int> samples_per_month;
};

int verbosity() {
  const char* v = std::getenv("MORPH_VERBOSE");
  return v ? std::atoi(v) : 0;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw morph::ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename T>
void overlay(json& obj, const char* key, const std::optional<T>& value) {
  if (value) obj[key] = *value;
}

// Config file first, flags on top.
ExperimentConfig resolve_config(const RunFlags& f) {
  json root = f.config_path.empty() ? json::object() : json::parse(read_file(f.config_path), nullptr, false);
  if (root.is_discarded() || !root.is_object()) {
    throw morph::ConfigError("config file " + f.config_path + " is not a JSON object");
  }
  overlay(root, "scenario", f.scenario);
  overlay(root, "inner_scenario", f.inner_scenario);
  overlay(root, "family_top_k", f.family_top_k);
  overlay(root, "seed", f.seed);
  overlay(root, "output_dir", f.out);
  if (f.data_path) {
    root["data"] = json{{"path", *f.data_path}};
    overlay(root["data"], "format", f.format);
  }
  if (f.synthetic) root["data"]["synthetic"]["preset"] = *f.synthetic;
  if (f.synthetic_seed) root["data"]["synthetic"]["seed"] = *f.synthetic_seed;
  json& morph = root["morph"];
  if (morph.is_null()) morph = json::object();
  overlay(morph, "tau_m", f.tau_m);
  overlay(morph, "tau_b", f.tau_b);
  overlay(morph, "n_m_cap", f.n_m_cap);
  overlay(morph, "lambda_u", f.lambda_u);
  overlay(morph, "fine_tune_epochs", f.fine_tune_epochs);
  if (morph.empty()) root.erase("morph");
  if (f.budget) root["al"]["budget_per_update"] = *f.budget;
  json& model = root["model"];
  if (model.is_null()) model = json::object();
  overlay(model, "hidden", f.hidden);
  overlay(model, "dropout", f.dropout);
  overlay(model, "max_epochs", f.max_epochs);
  overlay(model, "patience", f.patience);
  overlay(model, "batch_size", f.batch_size);
  overlay(model, "learning_rate", f.learning_rate);
  ExperimentConfig config = ExperimentConfig::parse(root.dump());
  if (config.output_dir.empty()) throw morph::ConfigError("missing field output_dir (--out)");
  config.validate();
  return config;
}

int cmd_run(const RunFlags& flags) {
  const ExperimentConfig config = resolve_config(flags);
  if (verbosity() > 0) {
    std::cerr << "running scenario " << morph::runner::scenario_name(config.scenario) << " -> "
              << config.output_dir.string() << "\n";
  }
  const auto result = morph::runner::run_experiment(config);
  morph::runner::write_artifacts(config, result, config.output_dir);
  const auto s = morph::eval::summarize(result.history);
  std::cout << "scenario=" << morph::runner::scenario_name(config.scenario)
            << " months=" << s.months << " mean_f1=" << s.mean_f1 << " mean_fpr=" << s.mean_fpr
            << " mean_fnr=" << s.mean_fnr << "\n";
  return morph::runner::kExitOk;
}

int cmd_compare(const std::vector<std::string>& dirs, const std::string& out_path) {
  std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
  const auto cmp = morph::runner::compare_runs(paths);
  for (std::size_t j = 0; j < paths.size(); ++j) {
    std::cerr << "run" << j << " = " << paths[j].string() << (j == 0 ? " (reference)" : "") << "\n";
  }
  for (const auto& w : cmp.warnings) std::cerr << "warning: " << w << "\n";
  if (out_path.empty()) {
    std::cout << cmp.csv;
  } else {
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw morph::Error("cannot write " + out_path);
    out << cmp.csv;
  }
  return morph::runner::kExitOk;
}

int cmd_gen(const GenFlags& f) {
  auto config = morph::data::SyntheticConfig::preset(f.preset);
  if (f.feature_dim) config.feature_dim = *f.feature_dim;
  if (f.months) config.months = *f.months;
  if (f.rotation_deg) config.rotation_deg = *f.rotation_deg;
  if (f.sigma) config.sigma = *f.sigma;
  if (f.samples_per_month) config.samples_per_month = *f.samples_per_month;
  const auto format = f.format ? morph::data::parse_format(*f.format)
                               : morph::data::format_from_path(f.out);
  const auto stream = morph::data::gen_synthetic(config, f.seed);
  morph::data::save_stream(f.out, stream, format);
  if (verbosity() > 0) {
    std::cerr << "wrote " << stream.train.size() << " train, " << stream.dev.size() << " dev, "
              << stream.test_size() << " test samples to " << f.out << "\n";
  }
  return morph::runner::kExitOk;
}

int cmd_grad_check(int models, std::uint64_t seed) {
  const auto r = morph::nn::run_gradient_check_suite(models, seed);
  const bool ok = r.worst_relative_error < 1e-4;
  std::cout << "models=" << r.models << " max_relative_error=" << r.worst_relative_error << " "
            << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? morph::runner::kExitOk : morph::runner::kExitInternal;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Concept-drift adaptation experiments for malware classifiers"};
  app.require_subcommand(1);

  RunFlags run;
  auto* run_cmd = app.add_subcommand("run", "Train, replay the test months, write artifacts");
  run_cmd->add_option("--config", run.config_path, "JSON experiment config");
  run_cmd->add_option("--scenario", run.scenario,
                      "static|morph|al_monthly|al_alternate|al_plus_morph|de_baseline|"
                      "de_baseline_static|family_limited");
  run_cmd->add_option("--inner-scenario", run.inner_scenario, "Scenario wrapped by family_limited");
  run_cmd->add_option("--family-top-k", run.family_top_k, "Train on the k most frequent malware families");
  run_cmd->add_option("--seed", run.seed, "Root seed (required)");
  run_cmd->add_option("--out", run.out, "Output directory");
  run_cmd->add_option("--data", run.data_path, "Stream file (csv or ndjson)");
  run_cmd->add_option("--format", run.format, "csv|ndjson (default: from extension)");
  run_cmd->add_option("--synthetic", run.synthetic, "Synthetic preset: default|severe|families");
  run_cmd->add_option("--synthetic-seed", run.synthetic_seed, "Stream seed override");
  run_cmd->add_option("--tau-m", run.tau_m, "Malware confidence floor");
  run_cmd->add_option("--tau-b", run.tau_b, "Benign confidence floor");
  run_cmd->add_option("--n-m-cap", run.n_m_cap, "Cap on pseudo-labels per class");
  run_cmd->add_option("--lambda-u", run.lambda_u, "Pseudo-label loss weight");
  run_cmd->add_option("--fine-tune-epochs", run.fine_tune_epochs, "Epochs per monthly update");
  run_cmd->add_option("--budget", run.budget, "Annotations per active-learning update");
  run_cmd->add_option("--hidden", run.hidden, "Hidden layer widths")->delimiter(',');
  run_cmd->add_option("--dropout", run.dropout, "Dropout rate");
  run_cmd->add_option("--max-epochs", run.max_epochs, "Initial training epoch limit");
  run_cmd->add_option("--patience", run.patience, "Early-stopping patience");
  run_cmd->add_option("--batch-size", run.batch_size, "Minibatch size");
  run_cmd->add_option("--lr", run.learning_rate, "Adam learning rate");

  std::vector<std::string> compare_dirs;
  std::string compare_out;
  auto* cmp_cmd = app.add_subcommand("compare", "Per-month and mean deltas against the first run");
  cmp_cmd->add_option("runs", compare_dirs, "Run output directories")->required();
  cmp_cmd->add_option("--out", compare_out, "Write the table here instead of stdout");

  GenFlags gen;
  auto* gen_cmd = app.add_subcommand("gen-synthetic", "Write a synthetic drift stream");
  gen_cmd->add_option("--preset", gen.preset, "default|severe|families");
  gen_cmd->add_option("--seed", gen.seed, "Stream seed")->required();
  gen_cmd->add_option("--out", gen.out, "Output file (.csv or .ndjson)")->required();
  gen_cmd->add_option("--format", gen.format, "csv|ndjson");
  gen_cmd->add_option("--feature-dim", gen.feature_dim);
  gen_cmd->add_option("--months", gen.months);
  gen_cmd->add_option("--rotation-deg", gen.rotation_deg);
  gen_cmd->add_option("--sigma", gen.sigma);
  gen_cmd->add_option("--samples-per-month", gen.samples_per_month);

  int gc_models = 20;
  std::uint64_t gc_seed = 1;
  auto* gc_cmd = app.add_subcommand("grad-check", "Finite-difference check of backpropagation");
  gc_cmd->add_option("--models", gc_models, "Number of random models");
  gc_cmd->add_option("--seed", gc_seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return morph::runner::kExitConfig;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*cmp_cmd) return cmd_compare(compare_dirs, compare_out);
    if (*gen_cmd) return cmd_gen(gen);
    if (*gc_cmd) return cmd_grad_check(gc_models, gc_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return morph::runner::exit_code_for(e);
  }
  return morph::runner::kExitInternal;
}
