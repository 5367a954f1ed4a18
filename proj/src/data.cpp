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

#include "morph/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "morph/errors.hpp"

namespace morph::data {
namespace {

using nlohmann::json;

enum class Split { kTrain, kDev, kTest };

std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "dev") return Split::kDev;
  if (s == "test") return Split::kTest;
  return std::nullopt;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// Collects parsed rows and assembles the stream once the file is done.
class StreamBuilder {
 public:
  void add(Split split, Sample sample, std::size_t line) {
    if (feature_dim_ == 0) feature_dim_ = static_cast<int>(sample.features.size());
    if (static_cast<int>(sample.features.size()) != feature_dim_) {
      throw ParseError(line, "expected " + std::to_string(feature_dim_) + " features, got " +
                                 std::to_string(sample.features.size()));
    }
    switch (split) {
      case Split::kTrain: stream_.train.push_back(std::move(sample)); break;
      case Split::kDev: stream_.dev.push_back(std::move(sample)); break;
      case Split::kTest: test_[sample.month].push_back(std::move(sample)); break;
    }
  }

  void set_feature_dim(int d) { feature_dim_ = d; }

  DriftStream finish() {
    if (test_.empty()) throw InputError("no test months");
    for (auto& [month, samples] : test_) {
      stream_.test_months.push_back(MonthBatch{month, std::move(samples)});
    }
    stream_.feature_dim = feature_dim_;
    stream_.validate();
    return std::move(stream_);
  }

 private:
  DriftStream stream_;
  std::map<int, std::vector<Sample>> test_;
  int feature_dim_ = 0;
};

DriftStream read_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_fields(line);
  std::map<std::string, std::size_t, std::less<>> column;
  for (std::size_t i = 0; i < header.size(); ++i) column.emplace(std::string(header[i]), i);
  auto require = [&](const char* name) {
    auto it = column.find(name);
    if (it == column.end()) throw ParseError(1, std::string("missing column '") + name + "'");
    return it->second;
  };
  const std::size_t split_col = require("split");
  const std::size_t month_col = require("month");
  const std::size_t label_col = require("label");
  const std::size_t family_col = require("family");
  std::vector<std::size_t> feature_cols;
  while (true) {
    auto it = column.find("f" + std::to_string(feature_cols.size()));
    if (it == column.end()) break;
    feature_cols.push_back(it->second);
  }
  if (feature_cols.empty()) throw ParseError(1, "missing column 'f0'");
  if (header.size() != feature_cols.size() + 4) {
    throw ParseError(1, "unexpected columns (feature columns must be f0..f{d-1})");
  }

  StreamBuilder builder;
  builder.set_feature_dim(static_cast<int>(feature_cols.size()));
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw ParseError(line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                                    std::to_string(fields.size()));
    }
    const auto split = parse_split(fields[split_col]);
    if (!split) throw ParseError(line_no, "unknown split '" + std::string(fields[split_col]) + "'");
    Sample s;
    const auto month = parse_number<int>(fields[month_col]);
    if (!month || *month < 0) throw ParseError(line_no, "invalid month");
    s.month = *month;
    const auto label = fields[label_col];
    if (label == "0") {
      s.label = kBenign;
    } else if (label == "1") {
      s.label = kMalware;
    } else if (!label.empty()) {
      throw ParseError(line_no, "unknown label '" + std::string(label) + "'");
    }
    if (!fields[family_col].empty()) s.family = std::string(fields[family_col]);
    s.features.reserve(feature_cols.size());
    for (std::size_t c : feature_cols) {
      const auto v = parse_number<double>(fields[c]);
      if (!v || !std::isfinite(*v)) {
        throw ParseError(line_no, "invalid feature value '" + std::string(fields[c]) + "'");
      }
      s.features.push_back(*v);
    }
    builder.add(*split, std::move(s), line_no);
  }
  return builder.finish();
}

DriftStream read_ndjson(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  StreamBuilder builder;
  int feature_dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, e.what());
    }
    if (!obj.is_object()) throw ParseError(line_no, "expected a JSON object");
    if (feature_dim == 0) {
      if (!obj.contains("feature_dim") || !obj["feature_dim"].is_number_integer() ||
          obj["feature_dim"].get<int>() < 1) {
        throw ParseError(line_no, "first line must declare a positive feature_dim");
      }
      feature_dim = obj["feature_dim"].get<int>();
      builder.set_feature_dim(feature_dim);
      continue;
    }
    for (const char* key : {"split", "month"}) {
      if (!obj.contains(key)) throw ParseError(line_no, std::string("missing key '") + key + "'");
    }
    if (!obj["split"].is_string()) throw ParseError(line_no, "split must be a string");
    const auto split = parse_split(obj["split"].get<std::string>());
    if (!split) throw ParseError(line_no, "unknown split '" + obj["split"].get<std::string>() + "'");
    Sample s;
    if (!obj["month"].is_number_integer() || obj["month"].get<int>() < 0) {
      throw ParseError(line_no, "invalid month");
    }
    s.month = obj["month"].get<int>();
    if (obj.contains("label") && !obj["label"].is_null()) {
      const auto& l = obj["label"];
      if (!l.is_number_integer() || (l.get<int>() != 0 && l.get<int>() != 1)) {
        throw ParseError(line_no, "unknown label " + l.dump());
      }
      s.label = l.get<int>();
    }
    if (obj.contains("family") && !obj["family"].is_null()) {
      if (!obj["family"].is_string()) throw ParseError(line_no, "family must be a string");
      s.family = obj["family"].get<std::string>();
    }
    if (obj.contains("dense")) {
      const auto& dense = obj["dense"];
      if (!dense.is_array()) throw ParseError(line_no, "dense must be an array");
      for (const auto& v : dense) {
        if (!v.is_number() || !std::isfinite(v.get<double>())) {
          throw ParseError(line_no, "invalid feature value " + v.dump());
        }
        s.features.push_back(v.get<double>());
      }
    } else if (obj.contains("sparse")) {
      const auto& sparse = obj["sparse"];
      if (!sparse.is_array()) throw ParseError(line_no, "sparse must be an array");
      s.features.assign(static_cast<std::size_t>(feature_dim), 0.0);
      for (const auto& idx : sparse) {
        if (!idx.is_number_integer() || idx.get<long long>() < 0 ||
            idx.get<long long>() >= feature_dim) {
          throw ParseError(line_no, "sparse index out of range: " + idx.dump());
        }
        s.features[idx.get<std::size_t>()] = 1.0;
      }
    } else {
      throw ParseError(line_no, "missing key 'dense' or 'sparse'");
    }
    builder.add(*split, std::move(s), line_no);
  }
  if (feature_dim == 0) throw ParseError(1, "missing feature_dim header line");
  return builder.finish();
}

void write_csv(std::ostream& out, const DriftStream& stream) {
  out << "split,month,label,family";
  for (int i = 0; i < stream.feature_dim; ++i) out << ",f" << i;
  out << '\n';
  auto row = [&](const char* split, const Sample& s) {
    if (s.family && s.family->find_first_of(",\"\n\r") != std::string::npos) {
      throw InputError("family tag not representable in CSV: " + *s.family);
    }
    out << split << ',' << s.month << ',';
    if (s.label) out << *s.label;
    out << ',' << s.family.value_or("");
    for (double v : s.features) out << ',' << format_double(v);
    out << '\n';
  };
  for (const auto& s : stream.train) row("train", s);
  for (const auto& s : stream.dev) row("dev", s);
  for (const auto& b : stream.test_months) {
    for (const auto& s : b.samples) row("test", s);
  }
}

bool is_sparse_binary(const std::vector<double>& x) {
  std::size_t ones = 0;
  for (double v : x) {
    if (v == 1.0) {
      ++ones;
    } else if (v != 0.0) {
      return false;
    }
  }
  return 2 * ones < x.size();
}

void write_ndjson(std::ostream& out, const DriftStream& stream) {
  out << json{{"feature_dim", stream.feature_dim}}.dump() << '\n';
  auto row = [&](const char* split, const Sample& s) {
    json obj;
    obj["split"] = split;
    obj["month"] = s.month;
    obj["label"] = s.label ? json(*s.label) : json(nullptr);
    obj["family"] = s.family ? json(*s.family) : json(nullptr);
    if (is_sparse_binary(s.features)) {
      json idx = json::array();
      for (std::size_t i = 0; i < s.features.size(); ++i) {
        if (s.features[i] == 1.0) idx.push_back(i);
      }
      obj["sparse"] = std::move(idx);
    } else {
      obj["dense"] = s.features;
    }
    out << obj.dump() << '\n';
  };
  for (const auto& s : stream.train) row("train", s);
  for (const auto& s : stream.dev) row("dev", s);
  for (const auto& b : stream.test_months) {
    for (const auto& s : b.samples) row("test", s);
  }
}

}  // namespace

void DriftStream::validate() const {
  if (feature_dim < 1) throw InputError("feature_dim must be positive");
  auto check = [&](const Sample& s, const char* where) {
    if (static_cast<int>(s.features.size()) != feature_dim) {
      throw InputError(std::string(where) + " sample has wrong feature dimension");
    }
    if (s.label && *s.label != kBenign && *s.label != kMalware) {
      throw InputError(std::string(where) + " sample has invalid label");
    }
  };
  for (const auto& s : train) check(s, "train");
  for (const auto& s : dev) check(s, "dev");
  if (test_months.empty()) throw InputError("no test months");
  for (std::size_t i = 0; i < test_months.size(); ++i) {
    const auto& b = test_months[i];
    if (b.samples.empty()) throw InputError("test month " + std::to_string(b.month) + " is empty");
    if (i > 0 && b.month <= test_months[i - 1].month) {
      throw InputError("test months must be strictly increasing");
    }
    for (const auto& s : b.samples) {
      if (s.month != b.month) throw InputError("sample month differs from its batch month");
      check(s, "test");
    }
  }
}

std::size_t DriftStream::test_size() const {
  std::size_t n = 0;
  for (const auto& b : test_months) n += b.size();
  return n;
}

Format parse_format(const std::string& name) {
  if (name == "csv") return Format::kCsv;
  if (name == "ndjson" || name == "jsonl") return Format::kNdjson;
  throw ConfigError("unknown stream format '" + name + "' (expected csv or ndjson)");
}

Format format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return Format::kCsv;
  if (ext == ".ndjson" || ext == ".jsonl") return Format::kNdjson;
  throw ConfigError("cannot infer stream format from '" + path.string() + "'");
}

DriftStream read_stream(std::istream& in, Format format) {
  return format == Format::kCsv ? read_csv(in) : read_ndjson(in);
}

DriftStream load_stream(const std::filesystem::path& path, Format format) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open stream file: " + path.string());
  return read_stream(in, format);
}

void write_stream(std::ostream& out, const DriftStream& stream, Format format) {
  if (format == Format::kCsv) {
    write_csv(out, stream);
  } else {
    write_ndjson(out, stream);
  }
}

void save_stream(const std::filesystem::path& path, const DriftStream& stream, Format format) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path.string());
  write_stream(out, stream, format);
  if (!out) throw Error("failed writing stream: " + path.string());
}

Standardizer Standardizer::fit(std::span<const Sample> train) {
  if (train.empty()) throw InputError("cannot fit standardizer on an empty training set");
  const std::size_t d = train.front().features.size();
  Standardizer st;
  st.mean_.assign(d, 0.0);
  st.stddev_.assign(d, 0.0);
  for (const auto& s : train) {
    if (s.features.size() != d) throw ShapeError("standardizer: ragged training features");
    for (std::size_t j = 0; j < d; ++j) st.mean_[j] += s.features[j];
  }
  const auto n = static_cast<double>(train.size());
  for (auto& m : st.mean_) m /= n;
  for (const auto& s : train) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = s.features[j] - st.mean_[j];
      st.stddev_[j] += c * c;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    const double sd = std::sqrt(st.stddev_[j] / n);
    // Constant columns can leave rounding residue instead of an exact 0.
    st.stddev_[j] = sd <= 1e-12 * std::max(1.0, std::abs(st.mean_[j])) ? 1.0 : sd;
  }
  return st;
}

std::vector<double> Standardizer::transform(std::span<const double> x) const {
  if (x.size() != mean_.size()) throw ShapeError("standardizer: feature dimension mismatch");
  std::vector<double> z(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) z[j] = (x[j] - mean_[j]) / stddev_[j];
  return z;
}

std::vector<double> Standardizer::inverse(std::span<const double> z) const {
  if (z.size() != mean_.size()) throw ShapeError("standardizer: feature dimension mismatch");
  std::vector<double> x(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) x[j] = z[j] * stddev_[j] + mean_[j];
  return x;
}

void Standardizer::apply(std::vector<Sample>& samples) const {
  for (auto& s : samples) s.features = transform(s.features);
}

DriftStream Standardizer::apply(const DriftStream& stream) const {
  DriftStream out = stream;
  apply(out.train);
  apply(out.dev);
  for (auto& b : out.test_months) apply(b.samples);
  return out;
}

DriftStream limit_families(const DriftStream& stream, int top_k) {
  if (top_k < 1) throw ConfigError("top_k must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& s : stream.train) {
    if (s.label != kMalware) continue;
    if (!s.family) throw InputError("training malware sample without a family tag");
    ++counts[*s.family];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > static_cast<std::size_t>(top_k)) ranked.resize(static_cast<std::size_t>(top_k));

  // Dev belongs to the training period, so it gets the same restriction.
  auto restrict = [&](const std::vector<Sample>& in) {
    std::vector<Sample> kept;
    for (const auto& s : in) {
      if (s.label == kMalware && !s.family) {
        throw InputError("training-period malware sample without a family tag");
      }
      const bool keep =
          s.label != kMalware || std::any_of(ranked.begin(), ranked.end(),
                                             [&](const auto& r) { return r.first == *s.family; });
      if (keep) kept.push_back(s);
    }
    return kept;
  };
  DriftStream out = stream;
  out.train = restrict(stream.train);
  out.dev = restrict(stream.dev);
  return out;
}

nn::Matrix feature_matrix(std::span<const Sample> samples) {
  const Eigen::Index d = samples.empty() ? 0 : static_cast<Eigen::Index>(samples.front().features.size());
  nn::Matrix x(static_cast<Eigen::Index>(samples.size()), d);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (static_cast<Eigen::Index>(samples[i].features.size()) != d) {
      throw ShapeError("ragged feature rows");
    }
    x.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(samples[i].features.data(), d);
  }
  return x;
}

nn::Dataset to_dataset(std::span<const Sample> samples) {
  nn::Dataset data;
  data.inputs = feature_matrix(samples);
  data.targets.reserve(samples.size());
  for (const auto& s : samples) {
    if (!s.label) throw InputError("training sample without a label");
    data.targets.push_back(*s.label);
  }
  return data;
}

}  // namespace morph::data
