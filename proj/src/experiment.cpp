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

#include "morph/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <sstream>

#include <json.hpp>

#include "morph/errors.hpp"
#include "morph/random.hpp"

namespace morph::runner {
namespace {

using nlohmann::json;

struct NamedScenario {
  Scenario scenario;
  std::string_view name;
};

constexpr NamedScenario kScenarios[] = {
    {Scenario::kStatic, "static"},
    {Scenario::kMorph, "morph"},
    {Scenario::kAlMonthly, "al_monthly"},
    {Scenario::kAlAlternate, "al_alternate"},
    {Scenario::kAlPlusMorph, "al_plus_morph"},
    {Scenario::kDeBaseline, "de_baseline"},
    {Scenario::kDeBaselineStatic, "de_baseline_static"},
};

bool is_baseline(Scenario s) {
  return s == Scenario::kDeBaseline || s == Scenario::kDeBaselineStatic;
}

void reject_unknown(const json& obj, std::span<const std::string> known, const std::string& prefix) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("unknown field " + prefix + key);
    }
  }
}

void reject_unknown(const json& obj, std::initializer_list<std::string> known,
                    const std::string& prefix) {
  reject_unknown(obj, std::span<const std::string>(known.begin(), known.size()), prefix);
}

const json& section(const json& root, const char* key) {
  static const json empty = json::object();
  if (!root.contains(key) || root[key].is_null()) return empty;
  if (!root[key].is_object()) throw ConfigError(std::string("field ") + key + " must be an object");
  return root[key];
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& prefix) {
  if (!obj.contains(key) || obj[key].is_null()) return;
  try {
    out = obj[key].get<T>();
  } catch (const json::exception&) {
    throw ConfigError("field " + prefix + key + " has the wrong type");
  }
}

template <typename T>
void read(const json& obj, const char* key, std::optional<T>& out, const std::string& prefix) {
  if (!obj.contains(key) || obj[key].is_null()) return;
  T value{};
  read(obj, key, value, prefix);
  out = value;
}

json synthetic_to_json(const data::SyntheticConfig& c) {
  return json{{"feature_dim", c.feature_dim},
              {"months", c.months},
              {"rotation_deg", c.rotation_deg},
              {"sigma", c.sigma},
              {"samples_per_month", c.samples_per_month},
              {"malware_fraction", c.malware_fraction},
              {"train_samples", c.train_samples},
              {"dev_samples", c.dev_samples},
              {"new_family_fraction", c.new_family_fraction},
              {"rotate_benign", c.rotate_benign},
              {"benign_spread_deg", c.benign_spread_deg},
              {"families", c.families},
              {"initial_families", c.initial_families},
              {"family_spacing_deg", c.family_spacing_deg},
              {"family_lifetime", c.family_lifetime}};
}

void read_synthetic(const json& obj, data::SyntheticConfig& c) {
  const std::string p = "data.synthetic.";
  read(obj, "feature_dim", c.feature_dim, p);
  read(obj, "months", c.months, p);
  read(obj, "rotation_deg", c.rotation_deg, p);
  read(obj, "sigma", c.sigma, p);
  read(obj, "samples_per_month", c.samples_per_month, p);
  read(obj, "malware_fraction", c.malware_fraction, p);
  read(obj, "train_samples", c.train_samples, p);
  read(obj, "dev_samples", c.dev_samples, p);
  read(obj, "new_family_fraction", c.new_family_fraction, p);
  read(obj, "rotate_benign", c.rotate_benign, p);
  read(obj, "benign_spread_deg", c.benign_spread_deg, p);
  read(obj, "families", c.families, p);
  read(obj, "initial_families", c.initial_families, p);
  read(obj, "family_spacing_deg", c.family_spacing_deg, p);
  read(obj, "family_lifetime", c.family_lifetime, p);
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

eval::MetricsRecord selection_f1(const nn::Mlp& model, std::span<const data::Sample> samples) {
  const auto probs = nn::predict_proba(model, data::feature_matrix(samples));
  const auto predicted = nn::predict_labels(probs);
  std::vector<int> truth;
  truth.reserve(samples.size());
  for (const auto& s : samples) truth.push_back(s.label.value_or(data::kBenign));
  return eval::compute_metrics(predicted, truth);
}

std::vector<eval::MetricsRecord> read_run_metrics(const std::filesystem::path& dir) {
  std::ifstream in(dir / "metrics.csv");
  if (!in) throw InputError("no metrics.csv in " + dir.string());
  return eval::read_metrics_csv(in);
}

std::string month_list(std::span<const eval::MetricsRecord> history) {
  std::string out = "[";
  for (std::size_t i = 0; i < history.size(); ++i) {
    out += (i ? "," : "") + std::to_string(history[i].month);
  }
  return out + "]";
}

// Identifies the stream a run replayed: the file path, or the synthetic
// preset, parameters and seed.
std::optional<std::string> stream_identity(const std::filesystem::path& dir) {
  std::ifstream in(dir / "config.json");
  if (!in) return std::nullopt;
  std::stringstream ss;
  ss << in.rdbuf();
  const ExperimentConfig c = ExperimentConfig::parse(ss.str());
  if (c.data.path) return "file:" + c.data.path->string();
  return "synthetic:" + synthetic_to_json(c.data.synthetic).dump() +
         " seed=" + std::to_string(c.stream_seed());
}

}  // namespace

std::string_view scenario_name(Scenario s) {
  for (const auto& n : kScenarios) {
    if (n.scenario == s) return n.name;
  }
  return "unknown";
}

Scenario parse_scenario(std::string_view name) {
  for (const auto& n : kScenarios) {
    if (n.name == name) return n.scenario;
  }
  throw ConfigError("unknown scenario '" + std::string(name) + "'");
}

bool needs_tau_m(Scenario s) {
  return s == Scenario::kMorph || s == Scenario::kAlAlternate || s == Scenario::kAlPlusMorph;
}

void ExperimentConfig::validate() const {
  if (!seed) throw ConfigError("missing field seed");
  if (needs_tau_m(scenario) && !morph) throw ConfigError("missing field morph.tau_m");
  if (morph) morph->validate();
  schedule();
  if (annotation_budget < 1) throw ConfigError("al.budget_per_update must be >= 1");
  if (family_top_k && *family_top_k < 1) throw ConfigError("family_top_k must be >= 1");
  for (int h : model.hidden) {
    if (h < 1) throw ConfigError("model.hidden entries must be positive");
  }
  if (!(model.dropout >= 0.0 && model.dropout < 1.0)) throw ConfigError("model.dropout must be in [0, 1)");
  if (model.max_epochs < 1) throw ConfigError("model.max_epochs must be >= 1");
  if (model.patience < 1) throw ConfigError("model.patience must be >= 1");
  if (model.batch_size < 1) throw ConfigError("model.batch_size must be >= 1");
  if (!(model.learning_rate > 0.0)) throw ConfigError("model.learning_rate must be > 0");
  if (baseline.epochs < 1) throw ConfigError("baseline.epochs must be >= 1");
  if (!(baseline.aging_threshold > 0.0 && baseline.aging_threshold <= 1.0)) {
    throw ConfigError("baseline.aging_threshold must be in (0, 1]");
  }
  for (double c : baseline.aggressiveness) {
    if (!(c > 0.0)) throw ConfigError("baseline.aggressiveness entries must be > 0");
  }
  if (!data.path) data.synthetic.validate();
}

ExperimentConfig ExperimentConfig::parse(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(root,
                 {"scenario", "inner_scenario", "family_top_k", "seed", "output_dir", "data",
                  "model", "morph", "al", "baseline"},
                 "");
  ExperimentConfig c;
  std::string scenario;
  read(root, "scenario", scenario, "");
  if (scenario.empty()) throw ConfigError("missing field scenario");
  read(root, "family_top_k", c.family_top_k, "");
  if (scenario == "family_limited") {
    std::string inner;
    read(root, "inner_scenario", inner, "");
    if (inner.empty()) throw ConfigError("missing field inner_scenario");
    if (!c.family_top_k) throw ConfigError("missing field family_top_k");
    c.scenario = parse_scenario(inner);
  } else {
    c.scenario = parse_scenario(scenario);
  }
  read(root, "seed", c.seed, "");
  std::string out;
  read(root, "output_dir", out, "");
  c.output_dir = out;

  const json& d = section(root, "data");
  reject_unknown(d, {"path", "format", "synthetic"}, "data.");
  std::string path;
  read(d, "path", path, "data.");
  if (!path.empty()) {
    c.data.path = path;
    std::string format;
    read(d, "format", format, "data.");
    c.data.format = format.empty() ? data::format_from_path(path) : data::parse_format(format);
  }
  const json& syn = section(d, "synthetic");
  {
    std::vector<std::string> keys = {"preset", "seed"};
    const json defaults = synthetic_to_json(data::SyntheticConfig{});
    for (const auto& [k, v] : defaults.items()) keys.push_back(k);
    reject_unknown(syn, keys, "data.synthetic.");
  }
  read(syn, "preset", c.data.synthetic_preset, "data.synthetic.");
  c.data.synthetic = data::SyntheticConfig::preset(c.data.synthetic_preset);
  read_synthetic(syn, c.data.synthetic);
  read(syn, "seed", c.data.synthetic_seed, "data.synthetic.");

  const json& m = section(root, "model");
  reject_unknown(m, {"hidden", "dropout", "max_epochs", "patience", "batch_size", "learning_rate"},
                 "model.");
  read(m, "hidden", c.model.hidden, "model.");
  read(m, "dropout", c.model.dropout, "model.");
  read(m, "max_epochs", c.model.max_epochs, "model.");
  read(m, "patience", c.model.patience, "model.");
  read(m, "batch_size", c.model.batch_size, "model.");
  read(m, "learning_rate", c.model.learning_rate, "model.");

  if (root.contains("morph") && !root["morph"].is_null()) {
    const json& mo = section(root, "morph");
    reject_unknown(mo, {"tau_m", "tau_b", "n_m_cap", "lambda_u", "fine_tune_epochs"}, "morph.");
    if (!mo.contains("tau_m") || mo["tau_m"].is_null()) throw ConfigError("missing field morph.tau_m");
    adapt::MorphConfig mc;
    read(mo, "tau_m", mc.tau_m, "morph.");
    read(mo, "tau_b", mc.tau_b, "morph.");
    read(mo, "n_m_cap", mc.n_m_cap, "morph.");
    read(mo, "lambda_u", mc.lambda_u, "morph.");
    read(mo, "fine_tune_epochs", mc.fine_tune_epochs, "morph.");
    c.morph = mc;
  }

  const json& al = section(root, "al");
  reject_unknown(al, {"budget_per_update"}, "al.");
  read(al, "budget_per_update", c.annotation_budget, "al.");

  const json& b = section(root, "baseline");
  reject_unknown(b, {"epochs", "aggressiveness", "aging_threshold", "init_scale"}, "baseline.");
  read(b, "epochs", c.baseline.epochs, "baseline.");
  read(b, "aggressiveness", c.baseline.aggressiveness, "baseline.");
  read(b, "aging_threshold", c.baseline.aging_threshold, "baseline.");
  read(b, "init_scale", c.baseline.init_scale, "baseline.");
  c.validate();
  return c;
}

std::string ExperimentConfig::echo() const {
  json root;
  root["scenario"] = scenario_name(scenario);
  root["family_top_k"] = optional_json(family_top_k);
  root["seed"] = optional_json(seed);
  root["output_dir"] = output_dir.string();
  json d;
  if (data.path) {
    d["path"] = data.path->string();
    d["format"] = data.format.value_or(data::Format::kCsv) == data::Format::kCsv ? "csv" : "ndjson";
  } else {
    json syn = synthetic_to_json(data.synthetic);
    syn["preset"] = data.synthetic_preset;
    syn["seed"] = seed ? json(stream_seed()) : optional_json(data.synthetic_seed);
    d["synthetic"] = std::move(syn);
  }
  root["data"] = std::move(d);
  root["model"] = json{{"hidden", model.hidden},
                       {"dropout", model.dropout},
                       {"max_epochs", model.max_epochs},
                       {"patience", model.patience},
                       {"batch_size", model.batch_size},
                       {"learning_rate", model.learning_rate}};
  if (morph) {
    root["morph"] = json{{"tau_m", morph->tau_m},
                         {"tau_b", optional_json(morph->tau_b)},
                         {"n_m_cap", optional_json(morph->n_m_cap)},
                         {"lambda_u", morph->lambda_u},
                         {"fine_tune_epochs", morph->fine_tune_epochs}};
  } else {
    root["morph"] = nullptr;
  }
  root["al"] = json{{"budget_per_update", annotation_budget}};
  root["baseline"] = json{{"epochs", baseline.epochs},
                          {"aggressiveness", baseline.aggressiveness},
                          {"aging_threshold", baseline.aging_threshold},
                          {"init_scale", baseline.init_scale}};
  return root.dump(2) + "\n";
}

std::uint64_t ExperimentConfig::root_seed() const {
  if (!seed) throw ConfigError("missing field seed");
  return *seed;
}

std::uint64_t ExperimentConfig::stream_seed() const {
  return data.synthetic_seed.value_or(derive_seed(root_seed(), SeedStream::kSynthetic));
}

adapt::MorphConfig ExperimentConfig::morph_or_default() const {
  return morph.value_or(adapt::MorphConfig{});
}

active::Schedule ExperimentConfig::schedule() const {
  switch (scenario) {
    case Scenario::kStatic:
    case Scenario::kDeBaseline:
    case Scenario::kDeBaselineStatic:
      return active::Schedule::kStatic;
    case Scenario::kMorph: return active::Schedule::kMorphOnly;
    case Scenario::kAlMonthly: return active::Schedule::kAlEveryMonth;
    case Scenario::kAlAlternate: return active::Schedule::kAlternate;
    case Scenario::kAlPlusMorph: return active::Schedule::kAlPlusMorphResidual;
  }
  throw ConfigError("unhandled scenario");
}

data::DriftStream load_source(const ExperimentConfig& config) {
  if (config.data.path) {
    const auto format = config.data.format.value_or(data::format_from_path(*config.data.path));
    return data::load_stream(*config.data.path, format);
  }
  return data::gen_synthetic(config.data.synthetic, config.stream_seed());
}

nn::Mlp train_initial(const data::DriftStream& stream, const ModelConfig& mc, std::uint64_t seed,
                      int* epochs_run) {
  std::vector<int> dims = {stream.feature_dim};
  dims.insert(dims.end(), mc.hidden.begin(), mc.hidden.end());
  dims.push_back(2);
  nn::Mlp model = nn::init_model(dims, mc.dropout, derive_seed(seed, SeedStream::kInit));
  const nn::Dataset train = data::to_dataset(stream.train);
  const std::span<const data::Sample> selection =
      stream.dev.empty() ? std::span<const data::Sample>(stream.train) : stream.dev;

  nn::TrainOptions options;
  options.epochs = 1;
  options.batch_size = mc.batch_size;
  options.adam.learning_rate = mc.learning_rate;
  nn::AdamState state = nn::AdamState::for_model(model, options.adam);
  nn::Mlp best = model;
  double best_f1 = -1.0;
  int since_best = 0;
  int epoch = 0;
  while (epoch < mc.max_epochs && since_best < mc.patience) {
    options.seed = derive_seed(seed, SeedStream::kTrain, static_cast<std::uint64_t>(epoch));
    nn::train(model, state, train, nullptr, options);
    ++epoch;
    const double f1 = selection_f1(model, selection).f1;
    if (f1 > best_f1) {
      best_f1 = f1;
      best = model;
      since_best = 0;
    } else {
      ++since_best;
    }
  }
  if (epochs_run) *epochs_run = epoch;
  return best;
}

RunResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  return run_experiment(config, load_source(config));
}

RunResult run_experiment(const ExperimentConfig& config, const data::DriftStream& raw) {
  config.validate();
  raw.validate();
  data::DriftStream limited = config.family_top_k ? data::limit_families(raw, *config.family_top_k) : raw;
  const auto standardizer = data::Standardizer::fit(limited.train);
  const data::DriftStream stream = standardizer.apply(limited);
  const std::uint64_t root = config.root_seed();

  RunResult result;
  if (is_baseline(config.scenario)) {
    auto ensemble = baseline::train_ensemble(stream.train, config.baseline,
                                             derive_seed(root, SeedStream::kBaseline));
    const bool updates = config.scenario == Scenario::kDeBaseline;
    for (const auto& batch : stream.test_months) {
      result.history.push_back(baseline::update_month(ensemble, batch, updates));
    }
    return result;
  }

  nn::Mlp model = train_initial(stream, config.model, root, &result.initial_epochs);
  adapt::FineTuneOptions ft;
  ft.batch_size = config.model.batch_size;
  ft.adam.learning_rate = config.model.learning_rate;
  auto state = adapt::AdaptationState::start(std::move(model), stream.train, ft);
  active::ALConfig al{config.annotation_budget, config.schedule()};
  auto schedule = active::run_schedule(state, stream.test_months, al, config.morph_or_default(),
                                       derive_seed(root, SeedStream::kSelection));
  result.history = std::move(schedule.history);
  result.annotations = std::move(schedule.annotations);
  result.confidence = std::move(state.confidence);
  result.model = std::move(state.model);
  return result;
}

void write_artifacts(const ExperimentConfig& config, const RunResult& result,
                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::trunc);
    if (!out) throw Error("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("metrics.csv");
    eval::write_metrics_csv(out, result.history);
  }
  {
    auto out = open("confidence.csv");
    eval::write_confidence_csv(out, result.confidence);
  }
  {
    auto out = open("annotations.csv");
    out << "month,index,label\n";
    for (const auto& e : result.annotations) {
      for (std::size_t k = 0; k < e.indices.size(); ++k) {
        out << e.month << ',' << e.indices[k] << ',' << e.labels[k] << '\n';
      }
    }
  }
  {
    auto out = open("config.json");
    out << config.echo();
  }
  {
    const auto s = eval::summarize(result.history);
    json summary = {{"scenario", scenario_name(config.scenario)},
                    {"months", s.months},
                    {"mean_f1", s.mean_f1},
                    {"mean_fpr", s.mean_fpr},
                    {"mean_fnr", s.mean_fnr},
                    {"mean_accuracy", s.mean_accuracy},
                    {"initial_epochs", result.initial_epochs}};
    auto out = open("summary.json");
    out << summary.dump(2) << '\n';
  }
  if (result.model) nn::save_checkpoint(*result.model, dir / "model.ckpt");
}

Comparison compare_runs(std::span<const std::filesystem::path> run_dirs) {
  if (run_dirs.empty()) throw ConfigError("compare needs at least one run directory");
  std::vector<std::vector<eval::MetricsRecord>> runs;
  for (const auto& dir : run_dirs) runs.push_back(read_run_metrics(dir));
  const auto& ref = runs.front();
  if (ref.empty()) throw InputError("reference run has no months");
  for (std::size_t j = 1; j < runs.size(); ++j) {
    bool same = runs[j].size() == ref.size();
    for (std::size_t i = 0; same && i < ref.size(); ++i) same = runs[j][i].month == ref[i].month;
    if (!same) {
      throw InputError("month mismatch: " + run_dirs[j].string() + " covers " +
                       month_list(runs[j]) + ", reference " + run_dirs[0].string() + " covers " +
                       month_list(ref));
    }
  }

  Comparison cmp;
  const auto ref_identity = stream_identity(run_dirs[0]);
  for (std::size_t j = 1; j < runs.size(); ++j) {
    const auto identity = stream_identity(run_dirs[j]);
    if (ref_identity && identity && *identity != *ref_identity) {
      cmp.warnings.push_back("run" + std::to_string(j) + " (" + run_dirs[j].string() +
                             ") replayed a different stream than the reference: " + *identity +
                             " vs " + *ref_identity);
    }
  }

  std::ostringstream out;
  out << "month";
  for (std::size_t j = 0; j < runs.size(); ++j) {
    out << ",run" << j << "_f1,run" << j << "_fpr,run" << j << "_fnr";
  }
  for (std::size_t j = 1; j < runs.size(); ++j) {
    out << ",delta" << j << "_f1,delta" << j << "_fpr,delta" << j << "_fnr";
  }
  out << '\n';
  using eval::format_real;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    out << ref[i].month;
    for (const auto& run : runs) {
      out << ',' << format_real(run[i].f1) << ',' << format_real(run[i].fpr) << ','
          << format_real(run[i].fnr);
    }
    for (std::size_t j = 1; j < runs.size(); ++j) {
      out << ',' << format_real(runs[j][i].f1 - ref[i].f1) << ','
          << format_real(runs[j][i].fpr - ref[i].fpr) << ','
          << format_real(runs[j][i].fnr - ref[i].fnr);
    }
    out << '\n';
  }
  std::vector<eval::Summary> summaries;
  for (const auto& run : runs) summaries.push_back(eval::summarize(run, ref));
  out << "mean";
  for (const auto& s : summaries) {
    out << ',' << format_real(s.mean_f1) << ',' << format_real(s.mean_fpr) << ','
        << format_real(s.mean_fnr);
  }
  for (std::size_t j = 1; j < summaries.size(); ++j) {
    out << ',' << format_real(*summaries[j].delta_f1) << ',' << format_real(*summaries[j].delta_fpr)
        << ',' << format_real(*summaries[j].delta_fnr);
  }
  out << '\n';
  cmp.csv = out.str();
  return cmp;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const InvariantError*>(&e) || dynamic_cast<const SequenceError*>(&e)) {
    return kExitInternal;
  }
  if (dynamic_cast<const Error*>(&e)) return kExitData;
  return kExitInternal;
}

}  // namespace morph::runner
