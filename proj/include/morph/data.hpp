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
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "morph/nn.hpp"

namespace morph::data {

inline constexpr int kBenign = 0;
inline constexpr int kMalware = 1;

struct Sample {
  std::vector<double> features;
  std::optional<int> label;  // kBenign / kMalware; hidden from models on test months
  int month = 0;
  std::optional<std::string> family;

  bool operator==(const Sample&) const = default;
};

struct MonthBatch {
  int month = 0;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
};

struct DriftStream {
  std::vector<Sample> train;
  std::vector<Sample> dev;
  std::vector<MonthBatch> test_months;
  int feature_dim = 0;

  // Throws InputError on inconsistent dimensions, empty or misordered
  // months, or samples whose month disagrees with their batch.
  void validate() const;
  std::size_t test_size() const;
};

enum class Format { kCsv, kNdjson };

Format parse_format(const std::string& name);
// Picks the format from the file extension (.csv, .ndjson, .jsonl).
Format format_from_path(const std::filesystem::path& path);

// Reads a stream. Throws ParseError naming the line for missing columns,
// ragged rows, and unknown labels or splits; InputError("no test months")
// when the test split is empty.
DriftStream read_stream(std::istream& in, Format format);
DriftStream load_stream(const std::filesystem::path& path, Format format);

void write_stream(std::ostream& out, const DriftStream& stream, Format format);
void save_stream(const std::filesystem::path& path, const DriftStream& stream, Format format);

// Per-feature mean and (population) standard deviation fit once on the
// training split. Zero-variance features get std 1, so they map to 0.
class Standardizer {
 public:
  static Standardizer fit(std::span<const Sample> train);

  std::vector<double> transform(std::span<const double> x) const;
  std::vector<double> inverse(std::span<const double> z) const;
  void apply(std::vector<Sample>& samples) const;
  DriftStream apply(const DriftStream& stream) const;

  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& stddev() const { return stddev_; }

 private:
  std::vector<double> mean_;
  std::vector<double> stddev_;
};

// Keeps only training and dev malware from the top_k most frequent training
// families (ties broken by family name). Benign samples and test months are
// untouched. Throws ConfigError for top_k < 1 and InputError when
// training-period malware lacks a family tag.
DriftStream limit_families(const DriftStream& stream, int top_k);

nn::Matrix feature_matrix(std::span<const Sample> samples);

// Labeled samples as a training set. Throws InputError on a missing label.
nn::Dataset to_dataset(std::span<const Sample> samples);

}  // namespace morph::data
