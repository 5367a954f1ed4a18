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

#include <cmath>
#include <algorithm>
#include <map>
#include <set>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "morph/errors.hpp"
#include "morph/random.hpp"
#include "morph/synthetic.hpp"

namespace morph::data {
namespace {

DriftStream parse(const std::string& text, Format format = Format::kCsv) {
  std::istringstream in(text);
  return read_stream(in, format);
}

std::string dump(const DriftStream& s, Format format) {
  std::ostringstream out;
  write_stream(out, s, format);
  return out.str();
}

Sample make(std::vector<double> x, std::optional<int> label, int month = 0,
            std::optional<std::string> family = std::nullopt) {
  return Sample{std::move(x), label, month, std::move(family)};
}

// Random stream with optional labels/families; binary rows exercise the
// sparse NDJSON encoding.
DriftStream random_stream(std::uint64_t seed) {
  Rng rng(seed);
  DriftStream s;
  s.feature_dim = 1 + static_cast<int>(uniform_index(rng, 6));
  auto sample = [&](int month) {
    Sample x;
    x.month = month;
    const bool binary = uniform01(rng) < 0.3;
    for (int j = 0; j < s.feature_dim; ++j) {
      x.features.push_back(binary ? (uniform01(rng) < 0.2 ? 1.0 : 0.0) : 10.0 * uniform01(rng) - 5.0);
    }
    const double r = uniform01(rng);
    if (r < 0.45) x.label = kBenign;
    else if (r < 0.9) x.label = kMalware;
    if (uniform01(rng) < 0.5) x.family = "fam" + std::to_string(uniform_index(rng, 4));
    return x;
  };
  for (int i = 0; i < 5; ++i) s.train.push_back(sample(0));
  for (int i = 0; i < 2; ++i) s.dev.push_back(sample(0));
  const int months = 1 + static_cast<int>(uniform_index(rng, 3));
  for (int m = 1; m <= months; ++m) {
    MonthBatch b{2 * m, {}};
    for (int i = 0; i < 3; ++i) b.samples.push_back(sample(2 * m));
    s.test_months.push_back(std::move(b));
  }
  return s;
}

TEST(LoadStream, PartitionsBySplitAndMonth) {
  const auto s = parse(
      "split,month,label,family,f0,f1\n"
      "train,0,1,A,0.5,1\n"
      "train,0,0,,1.5,-2\n"
      "test,1,1,B,3,4\n");
  EXPECT_EQ(s.feature_dim, 2);
  EXPECT_EQ(s.train.size(), 2u);
  EXPECT_TRUE(s.dev.empty());
  ASSERT_EQ(s.test_months.size(), 1u);
  EXPECT_EQ(s.test_months[0].month, 1);
  EXPECT_EQ(s.train[0].family, "A");
  EXPECT_FALSE(s.train[1].family.has_value());
  EXPECT_EQ(s.train[1].label, kBenign);
  EXPECT_EQ(s.test_months[0].samples[0].features, (std::vector<double>{3, 4}));
}

TEST(LoadStream, OrdersTestMonths) {
  const auto s = parse(
      "split,month,label,family,f0\n"
      "test,5,1,,1\n"
      "train,0,0,,1\n"
      "test,2,0,,1\n"
      "test,5,0,,1\n");
  ASSERT_EQ(s.test_months.size(), 2u);
  EXPECT_EQ(s.test_months[0].month, 2);
  EXPECT_EQ(s.test_months[1].month, 5);
  EXPECT_EQ(s.test_months[1].size(), 2u);
}

TEST(LoadStream, WrongArityNamesLine) {
  try {
    parse(
        "split,month,label,family,f0,f1\n"
        "train,0,1,,0.5,1\n"
        "train,0,0,,1.5\n"
        "test,1,1,,3,4\n");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(LoadStream, EmptyTestSplit) {
  try {
    parse("split,month,label,family,f0\ntrain,0,1,,0.5\n");
    FAIL() << "expected an input error";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("no test months"), std::string::npos);
  }
}

TEST(LoadStream, RejectsMissingColumnAndUnknownLabel) {
  EXPECT_THROW(parse("split,month,family,f0\ntest,1,,1\n"), ParseError);
  try {
    parse("split,month,label,family,f0\ntrain,0,1,,1\ntest,1,2,,1\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse("split,month,label,family,f0\nvalid,0,1,,1\n"), ParseError);
  EXPECT_THROW(parse("split,month,label,family,f0\ntest,1,1,,abc\n"), ParseError);
}

TEST(LoadStream, NdjsonDenseAndSparse) {
  const auto s = parse(
      "{\"feature_dim\": 4}\n"
      "{\"split\":\"train\",\"month\":0,\"label\":1,\"family\":\"A\",\"sparse\":[0,3]}\n"
      "{\"split\":\"dev\",\"month\":0,\"label\":0,\"family\":null,\"dense\":[0.5,0,0,1]}\n"
      "{\"split\":\"test\",\"month\":3,\"label\":null,\"family\":null,\"dense\":[1,2,3,4]}\n",
      Format::kNdjson);
  EXPECT_EQ(s.feature_dim, 4);
  EXPECT_EQ(s.train[0].features, (std::vector<double>{1, 0, 0, 1}));
  EXPECT_EQ(s.dev[0].features, (std::vector<double>{0.5, 0, 0, 1}));
  EXPECT_FALSE(s.test_months[0].samples[0].label.has_value());
}

TEST(LoadStream, NdjsonErrors) {
  EXPECT_THROW(parse("{\"split\":\"test\",\"month\":1,\"dense\":[1]}\n", Format::kNdjson), ParseError);
  try {
    parse(
        "{\"feature_dim\": 2}\n"
        "{\"split\":\"test\",\"month\":1,\"label\":1,\"sparse\":[2]}\n",
        Format::kNdjson);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse("{\"feature_dim\": 2}\n{\"split\":\"test\",\"month\":1,\"label\":1,"
                     "\"dense\":[1]}\n",
                     Format::kNdjson),
               ParseError);
  EXPECT_THROW(parse("{\"feature_dim\": 2}\nnot json\n", Format::kNdjson), ParseError);
}

// write(read(f)) == f, and read(write(s)) == s, in both formats.
TEST(StreamFiles, RoundTripProperty) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const DriftStream s = random_stream(seed);
    for (Format format : {Format::kCsv, Format::kNdjson}) {
      const std::string text = dump(s, format);
      const DriftStream back = parse(text, format);
      EXPECT_EQ(back.train, s.train);
      EXPECT_EQ(back.dev, s.dev);
      ASSERT_EQ(back.test_months.size(), s.test_months.size());
      for (std::size_t m = 0; m < s.test_months.size(); ++m) {
        EXPECT_EQ(back.test_months[m].samples, s.test_months[m].samples);
      }
      EXPECT_EQ(dump(back, format), text);
    }
  }
}

TEST(Standardizer, TwoPointColumn) {
  std::vector<Sample> train = {make({1.0}, kBenign), make({3.0}, kMalware)};
  const auto st = Standardizer::fit(train);
  EXPECT_DOUBLE_EQ(st.mean()[0], 2.0);
  EXPECT_DOUBLE_EQ(st.stddev()[0], 1.0);
  st.apply(train);
  EXPECT_DOUBLE_EQ(train[0].features[0], -1.0);
  EXPECT_DOUBLE_EQ(train[1].features[0], 1.0);
}

TEST(Standardizer, ConstantColumnMapsToZero) {
  std::vector<Sample> train = {make({5.0, 0.1}, 0), make({5.0, 0.1}, 1), make({5.0, 0.1}, 0)};
  const auto st = Standardizer::fit(train);
  EXPECT_EQ(st.stddev()[0], 1.0);
  EXPECT_EQ(st.stddev()[1], 1.0);
  st.apply(train);
  for (const auto& s : train) {
    EXPECT_EQ(s.features[0], 0.0);
    EXPECT_NEAR(s.features[1], 0.0, 1e-15);
  }
}

TEST(Standardizer, UsesTrainingStatisticsOnLaterMonths) {
  const std::vector<Sample> train = {make({0.0}, 0), make({2.0}, 1)};
  const auto st = Standardizer::fit(train);
  std::vector<Sample> month = {make({10.0}, 0), make({12.0}, 1)};
  st.apply(month);
  EXPECT_DOUBLE_EQ(month[0].features[0], 9.0);
  EXPECT_DOUBLE_EQ(month[1].features[0], 11.0);
}

TEST(Standardizer, MomentsAndInverseProperty) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    std::vector<Sample> train;
    const int n = 2 + static_cast<int>(uniform_index(rng, 50));
    for (int i = 0; i < n; ++i) {
      train.push_back(make({100.0 * uniform01(rng), uniform01(rng) - 0.5, 3.0}, 0));
    }
    const auto st = Standardizer::fit(train);
    auto z = train;
    st.apply(z);
    for (std::size_t j = 0; j < 3; ++j) {
      double mean = 0.0;
      double var = 0.0;
      for (const auto& s : z) mean += s.features[j];
      mean /= n;
      for (const auto& s : z) var += (s.features[j] - mean) * (s.features[j] - mean);
      const double sd = std::sqrt(var / n);
      EXPECT_NEAR(mean, 0.0, 1e-9);
      EXPECT_NEAR(sd, j == 2 ? 0.0 : 1.0, 1e-6);
    }
    for (std::size_t i = 0; i < train.size(); ++i) {
      const auto back = st.inverse(z[i].features);
      for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(back[j], train[i].features[j], 1e-9);
    }
  }
}

TEST(Standardizer, EmptyTrainRejected) {
  EXPECT_THROW(Standardizer::fit({}), InputError);
}

// Shared-isotropic-covariance Bayes rule fit on month-0 class means.
struct BayesRule {
  std::vector<double> w;
  double b = 0.0;

  static BayesRule fit(std::span<const Sample> samples) {
    const std::size_t d = samples.front().features.size();
    std::vector<double> mu[2] = {std::vector<double>(d), std::vector<double>(d)};
    int count[2] = {0, 0};
    for (const auto& s : samples) {
      for (std::size_t j = 0; j < d; ++j) mu[*s.label][j] += s.features[j];
      ++count[*s.label];
    }
    BayesRule r;
    r.w.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      mu[0][j] /= count[0];
      mu[1][j] /= count[1];
      r.w[j] = mu[1][j] - mu[0][j];
      r.b -= r.w[j] * (mu[1][j] + mu[0][j]) / 2.0;
    }
    return r;
  }

  double accuracy(std::span<const Sample> samples) const {
    int correct = 0;
    for (const auto& s : samples) {
      double z = b;
      for (std::size_t j = 0; j < w.size(); ++j) z += w[j] * s.features[j];
      correct += (z > 0 ? kMalware : kBenign) == *s.label;
    }
    return static_cast<double>(correct) / static_cast<double>(samples.size());
  }
};

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

TEST(Synthetic, NoRotationMeansNoDrift) {
  SyntheticConfig c;
  c.rotation_deg = 0.0;
  c.sigma = 0.8;  // noisy enough that accuracy is not trivially 1
  c.samples_per_month = 2000;
  c.train_samples = 2000;
  c.months = 4;
  const auto s = gen_synthetic(c, 3);
  const auto rule = BayesRule::fit(s.train);
  EXPECT_NEAR(rule.accuracy(s.test_months.back().samples), rule.accuracy(s.train), 0.03);
}

TEST(Synthetic, RotationBreaksStaticRule) {
  SyntheticConfig c;
  c.sigma = 0.05;
  c.rotation_deg = 15.0;
  c.months = 6;
  c.samples_per_month = 2000;
  const auto s = gen_synthetic(c, 11);
  const auto rule = BayesRule::fit(s.train);
  // Closed-form oracle: the month-0 rule is ~ sign(x0); a mean at angle t
  // sits cos(t) from it, so accuracy is Phi(cos(t) / sigma).
  const double month6_expected = normal_cdf(std::cos(90.0 * std::numbers::pi / 180.0) / c.sigma);
  EXPECT_NEAR(month6_expected, 0.5, 1e-12);
  EXPECT_GT(rule.accuracy(s.train), 0.99);
  const double month6 = rule.accuracy(s.test_months.back().samples);
  EXPECT_LT(month6, 0.75);
  EXPECT_NEAR(month6, month6_expected, 0.05);
}

TEST(Synthetic, DeterministicPerSeed) {
  const auto c = SyntheticConfig::preset("default");
  const auto a = gen_synthetic(c, 42);
  const auto b = gen_synthetic(c, 42);
  const auto other = gen_synthetic(c, 43);
  EXPECT_EQ(dump(a, Format::kCsv), dump(b, Format::kCsv));
  EXPECT_NE(dump(a, Format::kCsv), dump(other, Format::kCsv));
}

TEST(Synthetic, EmpiricalMeansTrackConfiguredMeans) {
  SyntheticConfig c;
  c.sigma = 0.3;
  c.rotation_deg = 25.0;
  c.months = 3;
  const auto s = gen_synthetic(c, 5);
  for (const auto& batch : s.test_months) {
    const double a = batch.month * c.rotation_deg * std::numbers::pi / 180.0;
    for (int cls : {kBenign, kMalware}) {
      std::vector<double> mean(static_cast<std::size_t>(c.feature_dim), 0.0);
      int n = 0;
      for (const auto& x : batch.samples) {
        if (x.label != cls) continue;
        for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += x.features[j];
        ++n;
      }
      ASSERT_EQ(n, 250);
      const double sign = cls == kMalware ? 1.0 : -1.0;
      const double tol = 3.0 * c.sigma / std::sqrt(static_cast<double>(n));
      EXPECT_NEAR(mean[0] / n, sign * std::cos(a), tol);
      EXPECT_NEAR(mean[1] / n, sign * std::sin(a), tol);
      for (std::size_t j = 2; j < mean.size(); ++j) EXPECT_NEAR(mean[j] / n, 0.0, tol);
    }
  }
}

TEST(Synthetic, FamilyTagsEncodeMalwareMean) {
  SyntheticConfig c;
  c.new_family_fraction = 0.3;
  const auto s = gen_synthetic(c, 8);
  int ahead = 0;
  for (const auto& batch : s.test_months) {
    for (const auto& x : batch.samples) {
      if (x.label == kBenign) {
        EXPECT_FALSE(x.family.has_value());
        continue;
      }
      const std::string current = "r" + std::to_string(batch.month);
      const std::string next = "r" + std::to_string(batch.month + 1);
      ASSERT_TRUE(x.family == current || x.family == next);
      ahead += x.family == next;
    }
  }
  EXPECT_GT(ahead, 0);
}

TEST(Synthetic, FamilyPresetRanksFamiliesByIndex) {
  const auto c = SyntheticConfig::preset("families");
  const auto s = gen_synthetic(c, 1);
  std::map<std::string, int> counts;
  for (const auto& x : s.train) {
    if (x.label == kMalware) ++counts[*x.family];
  }
  ASSERT_EQ(counts.size(), 10u);
  for (int f = 0; f + 1 < 10; ++f) EXPECT_GT(counts[family_name(f)], counts[family_name(f + 1)]);
  // The first test month only shows the initial families plus one new one.
  for (const auto& x : s.test_months.front().samples) {
    if (x.label == kMalware) EXPECT_LE(*x.family, family_name(c.initial_families));
  }
}

TEST(Synthetic, FamilyLifetimeSlidesWindow) {
  SyntheticConfig c = SyntheticConfig::preset("families");
  c.family_lifetime = 2;
  const auto s = gen_synthetic(c, 4);
  for (const auto& batch : s.test_months) {
    const int newest = std::min(c.families, c.initial_families + batch.month) - 1;
    std::set<std::string> seen;
    for (const auto& x : batch.samples) {
      if (x.label == kMalware) seen.insert(*x.family);
    }
    EXPECT_EQ(seen, (std::set<std::string>{family_name(newest - 1), family_name(newest)}))
        << "month " << batch.month;
  }
}

TEST(Synthetic, BenignSpreadCoversArc) {
  SyntheticConfig c;
  c.benign_spread_deg = 30.0;
  c.sigma = 0.01;
  c.rotation_deg = 0.0;
  const auto s = gen_synthetic(c, 9);
  double lo = 180.0, hi = 180.0;
  for (const auto& x : s.train) {
    if (x.label != kBenign) continue;
    double a = std::atan2(x.features[1], x.features[0]) * 180.0 / std::numbers::pi;
    if (a < 0) a += 360.0;
    lo = std::min(lo, a);
    hi = std::max(hi, a);
  }
  EXPECT_LT(lo, 155.0);
  EXPECT_GT(hi, 205.0);
  EXPECT_GT(lo, 148.0);
  EXPECT_LT(hi, 212.0);
  // Zero spread leaves the stream exactly as without the option.
  SyntheticConfig plain;
  SyntheticConfig zero = plain;
  zero.benign_spread_deg = 0.0;
  EXPECT_EQ(dump(gen_synthetic(plain, 3), Format::kCsv), dump(gen_synthetic(zero, 3), Format::kCsv));
}

TEST(Synthetic, RejectsInvalidConfig) {
  SyntheticConfig c;
  c.sigma = 0.0;
  EXPECT_THROW(gen_synthetic(c, 1), ConfigError);
  c = SyntheticConfig{};
  c.rotation_deg = 91.0;
  EXPECT_THROW(gen_synthetic(c, 1), ConfigError);
  c = SyntheticConfig{};
  c.months = 0;
  EXPECT_THROW(gen_synthetic(c, 1), ConfigError);
  c = SyntheticConfig{};
  c.feature_dim = 1;
  EXPECT_THROW(gen_synthetic(c, 1), ConfigError);
  c = SyntheticConfig::preset("families");
  c.benign_spread_deg = 40.0;  // would swallow the outermost family
  EXPECT_THROW(gen_synthetic(c, 1), ConfigError);
  c = SyntheticConfig::preset("families");
  c.family_lifetime = -1;
  EXPECT_THROW(gen_synthetic(c, 1), ConfigError);
  EXPECT_THROW(SyntheticConfig::preset("nope"), ConfigError);
}

DriftStream family_stream() {
  DriftStream s;
  s.feature_dim = 1;
  auto add = [&](const std::string& fam, int n) {
    for (int i = 0; i < n; ++i) s.train.push_back(make({1.0}, kMalware, 0, fam));
  };
  add("A", 5);
  add("B", 3);
  add("C", 1);
  s.train.push_back(make({-1.0}, kBenign));
  s.dev = {make({1.0}, kMalware, 0, "A"), make({1.0}, kMalware, 0, "C"), make({-1.0}, kBenign)};
  s.test_months.push_back(MonthBatch{1, {make({1.0}, kMalware, 1, "C"), make({0.0}, kBenign, 1)}});
  return s;
}

TEST(LimitFamilies, KeepsMostFrequent) {
  const auto out = limit_families(family_stream(), 2);
  std::map<std::string, int> counts;
  int benign = 0;
  for (const auto& s : out.train) {
    if (s.label == kMalware) ++counts[*s.family];
    else ++benign;
  }
  EXPECT_EQ(counts, (std::map<std::string, int>{{"A", 5}, {"B", 3}}));
  EXPECT_EQ(benign, 1);
  ASSERT_EQ(out.dev.size(), 2u);
  EXPECT_EQ(out.dev[0].family, "A");
  EXPECT_EQ(out.dev[1].label, kBenign);
  EXPECT_EQ(out.test_months[0].samples, family_stream().test_months[0].samples);
}

TEST(LimitFamilies, LargeKIsNoOp) {
  const auto in = family_stream();
  const auto out = limit_families(in, 3);
  EXPECT_EQ(out.train, in.train);
  EXPECT_EQ(limit_families(in, 10).train, in.train);
}

TEST(LimitFamilies, TiesBreakByName) {
  DriftStream s = family_stream();
  for (int i = 0; i < 2; ++i) s.train.push_back(make({1.0}, kMalware, 0, "Aa"));
  for (int i = 0; i < 2; ++i) s.train.push_back(make({1.0}, kMalware, 0, "C"));
  // A:5, B:3, Aa:2, C:3 -> top 2 are A and B (B < C).
  const auto out = limit_families(s, 2);
  for (const auto& x : out.train) {
    if (x.label == kMalware) EXPECT_TRUE(x.family == "A" || x.family == "B");
  }
}

TEST(LimitFamilies, Errors) {
  EXPECT_THROW(limit_families(family_stream(), 0), ConfigError);
  DriftStream s = family_stream();
  s.train.push_back(make({1.0}, kMalware));
  EXPECT_THROW(limit_families(s, 2), InputError);
}

TEST(Dataset, RequiresLabels) {
  const std::vector<Sample> rows = {make({1.0, 2.0}, kMalware), make({3.0, 4.0}, std::nullopt)};
  EXPECT_THROW(to_dataset(rows), InputError);
  const auto d = to_dataset(std::span<const Sample>(rows).first(1));
  EXPECT_EQ(d.inputs(0, 1), 2.0);
  EXPECT_EQ(d.targets, std::vector<int>{1});
}

}  // namespace
}  // namespace morph::data
