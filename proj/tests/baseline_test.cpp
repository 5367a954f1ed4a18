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

#include "morph/baseline.hpp"

#include <numeric>

#include <gtest/gtest.h>

#include "morph/errors.hpp"
#include "morph/random.hpp"
#include "morph/synthetic.hpp"

namespace morph::baseline {
namespace {

LinearModel linear(std::vector<double> w, double b = 0.0) {
  LinearModel m;
  m.weights = std::move(w);
  m.bias = b;
  return m;
}

// Member i predicts sign(signs[i] * x0).
DEEnsemble sign_ensemble(std::array<int, kEnsembleSize> signs) {
  DEEnsemble e;
  for (std::size_t i = 0; i < kEnsembleSize; ++i) e.models[i] = linear({1.0 * signs[i]});
  e.model_weights.fill(1.0 / kEnsembleSize);
  return e;
}

TEST(PaUpdate, ClosedFormStep) {
  LinearModel m = linear({0.0, 0.0});
  const std::vector<double> x = {1.0, 0.0};
  pa_update(m, x, +1);
  EXPECT_EQ(m.weights, (std::vector<double>{0.5, 0.0}));
  EXPECT_EQ(m.bias, 0.5);
}

TEST(PaUpdate, NoChangeOutsideMargin) {
  LinearModel m = linear({2.0, -1.0}, 0.5);
  const std::vector<double> x = {1.0, 0.5};  // score 2.0
  pa_update(m, x, +1);
  EXPECT_EQ(m.weights, (std::vector<double>{2.0, -1.0}));
  EXPECT_EQ(m.bias, 0.5);
}

TEST(PaUpdate, AggressivenessCapsStep) {
  LinearModel m = linear({0.0});
  m.aggressiveness = 0.1;
  const std::vector<double> x = {1.0};
  pa_update(m, x, -1);
  EXPECT_DOUBLE_EQ(m.weights[0], -0.1);
  EXPECT_DOUBLE_EQ(m.bias, -0.1);
}

TEST(PaUpdate, ZeroVectorStillMovesBias) {
  LinearModel m = linear({0.0, 0.0});
  const std::vector<double> x = {0.0, 0.0};
  pa_update(m, x, -1);
  EXPECT_EQ(m.bias, -1.0);
}

TEST(PaUpdate, MarginIncreasesProperty) {
  Rng rng(6);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t d = 1 + uniform_index(rng, 5);
    LinearModel m;
    std::vector<double> x(d);
    for (std::size_t j = 0; j < d; ++j) {
      m.weights.push_back(2.0 * uniform01(rng) - 1.0);
      x[j] = 4.0 * uniform01(rng) - 2.0;
    }
    m.bias = uniform01(rng) - 0.5;
    m.aggressiveness = uniform01(rng) < 0.5 ? 0.05 : std::numeric_limits<double>::infinity();
    const int y = uniform01(rng) < 0.5 ? 1 : -1;
    const double before = y * m.score(x);
    pa_update(m, x, y);
    const double after = y * m.score(x);
    if (before < 1.0) {
      EXPECT_GT(after, before);
      if (std::isinf(m.aggressiveness)) EXPECT_NEAR(after, 1.0, 1e-9);
    } else {
      EXPECT_EQ(after, before);
    }
  }
}

TEST(PaUpdate, RejectsBadInput) {
  LinearModel m = linear({0.0});
  const std::vector<double> x = {1.0};
  EXPECT_THROW(pa_update(m, x, 0), InputError);
  const std::vector<double> nan = {std::nan("")};
  EXPECT_THROW(pa_update(m, nan, 1), InputError);
}

TEST(EnsemblePredict, Unanimous) {
  const auto e = sign_ensemble({1, 1, 1, 1, 1});
  const std::vector<double> x = {2.0};
  const auto v = ensemble_predict(e, x);
  EXPECT_EQ(v.label, 1);
  EXPECT_NEAR(v.score, 1.0, 1e-12);
  EXPECT_TRUE(v.deviating().empty());
}

TEST(EnsemblePredict, FlagsDeviatingMember) {
  const auto e = sign_ensemble({1, 1, -1, 1, 1});
  const std::vector<double> x = {2.0};
  const auto v = ensemble_predict(e, x);
  EXPECT_EQ(v.label, 1);
  EXPECT_NEAR(v.score, 0.6, 1e-12);
  EXPECT_EQ(v.deviating(), std::vector<std::size_t>{2});
}

TEST(EnsemblePredict, TieGoesBenign) {
  auto e = sign_ensemble({1, -1, 1, -1, 1});
  e.model_weights = {0.25, 0.25, 0.25, 0.25, 0.0};
  const std::vector<double> x = {1.0};
  const auto v = ensemble_predict(e, x);
  EXPECT_EQ(v.score, 0.0);
  EXPECT_EQ(v.label, -1);
  // A zero-scoring member votes benign too.
  EXPECT_EQ(linear({0.0}).label(x), -1);
}

data::MonthBatch month_of(int month, std::initializer_list<std::pair<double, int>> rows) {
  data::MonthBatch b{month, {}};
  for (auto [x, y] : rows) b.samples.push_back({{x}, y, month, std::nullopt});
  return b;
}

TEST(UpdateMonth, AgreementIsAFixedPoint) {
  auto e = sign_ensemble({1, 1, 1, 1, 1});
  const auto before = e;
  const auto r = update_month(e, month_of(1, {{1.0, 1}, {-2.0, 0}, {3.0, 0}}), true);
  EXPECT_EQ(r.tp, 1);
  EXPECT_EQ(r.tn, 1);
  EXPECT_EQ(r.fp, 1);
  for (std::size_t i = 0; i < kEnsembleSize; ++i) {
    EXPECT_EQ(e.models[i].weights, before.models[i].weights);
    EXPECT_EQ(e.models[i].bias, before.models[i].bias);
    EXPECT_NEAR(e.model_weights[i], 0.2, 1e-12);
  }
}

TEST(UpdateMonth, MetricsPrecedeUpdates) {
  auto e = sign_ensemble({1, 1, -1, -1, 1});
  auto frozen = e;
  const auto batch = month_of(2, {{1.0, 1}, {-1.0, 1}, {2.0, 0}, {-0.5, 0}});
  const auto with = update_month(e, batch, true);
  const auto without = update_month(frozen, batch, false);
  EXPECT_EQ(with, without);
}

TEST(UpdateMonth, NoUpdateModeMatchesIndependentStaticModels) {
  data::SyntheticConfig c;
  c.months = 4;
  c.samples_per_month = 60;
  c.train_samples = 100;
  const auto s = data::gen_synthetic(c, 3);
  DEOptions o;
  const DEEnsemble trained = train_ensemble(s.train, o, 10);
  DEEnsemble e = trained;
  for (const auto& batch : s.test_months) {
    const auto r = update_month(e, batch, false);
    // Oracle: vote directly with the untouched members.
    std::vector<int> preds, truth;
    for (const auto& x : batch.samples) {
      double score = 0.0;
      for (std::size_t i = 0; i < kEnsembleSize; ++i) {
        score += trained.model_weights[i] * trained.models[i].label(x.features);
        EXPECT_EQ(e.models[i].score(x.features), trained.models[i].score(x.features));
      }
      preds.push_back(score > 0.0 ? 1 : 0);
      truth.push_back(*x.label);
    }
    EXPECT_EQ(r, eval::compute_metrics(preds, truth, batch.month));
  }
  EXPECT_EQ(e.model_weights, trained.model_weights);
}

// A month whose ground truth mostly contradicts the majority: the minority
// members were right, yet the update drags them toward the wrong majority.
TEST(UpdateMonth, SelfPoisoningOnFlippedMonth) {
  auto e = sign_ensemble({1, 1, 1, -1, -1});
  for (auto& m : e.models) m.aggressiveness = 1.0;
  data::MonthBatch b{1, {}};
  Rng rng(12);
  for (int i = 0; i < 100; ++i) {
    const double x = 0.2 + uniform01(rng);
    const double sx = i % 2 ? x : -x;
    const int truth = i % 10 == 0 ? (sx > 0) : (sx < 0);  // 90% flipped
    b.samples.push_back({{sx}, truth, 1, std::nullopt});
  }
  auto member_accuracy = [&](const LinearModel& m) {
    int ok = 0;
    for (const auto& s : b.samples) ok += to_class(m.label(s.features)) == *s.label;
    return ok / 100.0;
  };
  std::array<double, kEnsembleSize> before{};
  for (std::size_t i = 0; i < kEnsembleSize; ++i) before[i] = member_accuracy(e.models[i]);
  const auto r = update_month(e, b, true);
  EXPECT_NEAR(r.accuracy(), 0.1, 1e-12);
  double mean_before = 0.0, mean_after = 0.0;
  for (std::size_t i = 0; i < kEnsembleSize; ++i) {
    mean_before += before[i] / kEnsembleSize;
    mean_after += member_accuracy(e.models[i]) / kEnsembleSize;
  }
  EXPECT_LT(mean_after, mean_before);
  EXPECT_LT(member_accuracy(e.models[3]), before[3]);
  // The right-but-outvoted members also lose their vote.
  EXPECT_EQ(e.model_weights[3], 0.0);
  EXPECT_EQ(e.model_weights[4], 0.0);
}

TEST(UpdateMonth, WeightsStayAProbabilityVector) {
  data::SyntheticConfig c;
  c.months = 8;
  c.samples_per_month = 50;
  c.train_samples = 100;
  c.rotation_deg = 20.0;
  c.sigma = 0.3;
  const auto s = data::gen_synthetic(c, 7);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    DEEnsemble e = train_ensemble(s.train, {}, seed);
    for (const auto& batch : s.test_months) {
      update_month(e, batch, true);
      double sum = 0.0;
      for (double w : e.model_weights) {
        EXPECT_GE(w, 0.0);
        sum += w;
      }
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
  }
}

TEST(UpdateMonth, AllAgingFallsBackToUniform) {
  auto e = sign_ensemble({1, 1, 1, 1, 1});
  e.aging_threshold = 1.0;
  // Disagreement on one sample puts member 4 below a threshold of 1.
  e.models[4] = linear({1.0}, -5.0);
  update_month(e, month_of(1, {{1.0, 1}, {2.0, 1}}), true);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(e.model_weights[i], 0.25, 1e-12);
  EXPECT_EQ(e.model_weights[4], 0.0);
}

TEST(TrainEnsemble, DeterministicAndDiverse) {
  data::SyntheticConfig c;
  c.train_samples = 80;
  const auto s = data::gen_synthetic(c, 1);
  const auto a = train_ensemble(s.train, {}, 5);
  const auto b = train_ensemble(s.train, {}, 5);
  for (std::size_t i = 0; i < kEnsembleSize; ++i) {
    EXPECT_EQ(a.models[i].weights, b.models[i].weights);
    EXPECT_EQ(a.models[i].aggressiveness, DEOptions{}.aggressiveness[i]);
  }
  EXPECT_NE(a.models[0].weights, a.models[4].weights);
  // Separable training data: the strongest learner fits it.
  int ok = 0;
  for (const auto& x : s.train) ok += to_class(a.models[4].label(x.features)) == *x.label;
  EXPECT_EQ(ok, static_cast<int>(s.train.size()));
}

TEST(DEEnsemble, ValidateRejectsBadWeights) {
  auto e = sign_ensemble({1, 1, 1, 1, 1});
  e.model_weights[0] = 0.5;
  EXPECT_THROW(e.validate(), InvariantError);
}

}  // namespace
}  // namespace morph::baseline
