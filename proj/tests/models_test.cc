/*
 * Copyright 2026 The bootmon Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "gtest/gtest.h"

#include "bootmon/error.h"
#include "bootmon/models.h"
#include "bootmon/random.h"
#include "bootmon/stats.h"

namespace bootmon {
namespace {

struct Data {
  Matrix X;
  std::vector<double> y;
};

Data noisy_data(std::size_t n, std::size_t d, std::uint64_t seed,
                double noise = 0.5) {
  Rng rng(seed);
  Data data{Matrix(n, d), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      data.X(i, j) = standard_normal(rng);
      s += (j % 2 ? -1.0 : 1.0) * data.X(i, j) * (1.0 + j);
    }
    data.y[i] = s + std::sin(3 * data.X(i, 0)) + noise * standard_normal(rng);
  }
  return data;
}

// Poisson needs nonnegative targets.
std::vector<double> target_for(ModelKind kind, const std::vector<double>& y) {
  if (kind != ModelKind::kPoisson) return y;
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = std::round(std::abs(y[i]));
  return out;
}

const ModelKind kAllKinds[] = {ModelKind::kOls, ModelKind::kPoisson,
                               ModelKind::kCart, ModelKind::kRandomForest,
                               ModelKind::kGradientBoosting};
const ModelKind kTreeKinds[] = {ModelKind::kCart, ModelKind::kRandomForest,
                                ModelKind::kGradientBoosting};

TEST(ModelKinds, NamesRoundTrip) {
  for (ModelKind k : kAllKinds) EXPECT_EQ(parse_model_kind(to_string(k)), k);
  EXPECT_THROW(parse_model_kind("mlp"), ArgumentError);
}

TEST(EstimatorSpec, FrozenDefaults) {
  const auto cart = EstimatorSpec::defaults(ModelKind::kCart);
  EXPECT_EQ(cart.hyper.max_depth, 0u);
  EXPECT_EQ(cart.hyper.min_samples_leaf, 1u);
  const auto rf = EstimatorSpec::defaults(ModelKind::kRandomForest);
  EXPECT_EQ(rf.hyper.n_trees, 100u);
  EXPECT_TRUE(rf.hyper.bootstrap);
  const auto gb = EstimatorSpec::defaults(ModelKind::kGradientBoosting);
  EXPECT_EQ(gb.hyper.n_rounds, 100u);
  EXPECT_EQ(gb.hyper.learning_rate, 0.1);
  EXPECT_EQ(gb.hyper.max_depth, 3u);
  const auto glm = EstimatorSpec::defaults(ModelKind::kPoisson);
  EXPECT_EQ(glm.hyper.glm_tol, 1e-8);
  EXPECT_EQ(glm.hyper.glm_max_iter, 100u);
  EXPECT_EQ(EstimatorSpec::defaults(ModelKind::kOls).hyper.l2_ridge, 1e-10);
}

TEST(EstimatorSpec, ConfigRoundTrip) {
  for (ModelKind k : kAllKinds) {
    EstimatorSpec s = EstimatorSpec::defaults(k);
    s.hyper.learning_rate = 0.07;
    s.hyper.min_samples_leaf = 3;
    EXPECT_EQ(EstimatorSpec::from_config(s.to_config()), s);
  }
  const auto partial =
      EstimatorSpec::from_config("# comment\nkind = gradient_boosting\n"
                                 "n_rounds = 7\n");
  EXPECT_EQ(partial.hyper.n_rounds, 7u);
  EXPECT_EQ(partial.hyper.max_depth, 3u);
  EXPECT_THROW(EstimatorSpec::from_config("kind = cart\nmaxdepth = 2\n"),
               ArgumentError);
  EXPECT_THROW(EstimatorSpec::from_config("max_depth = 2\n"), ArgumentError);
  EXPECT_THROW(EstimatorSpec::from_config("kind = cart\nmax_depth = x\n"),
               ArgumentError);
  EXPECT_THROW(EstimatorSpec::from_config("kind = gradient_boosting\n"
                                          "learning_rate = -1\n"),
               ArgumentError);
}

TEST(Ols, ExactLine) {
  Matrix X(20, 1);
  std::vector<double> y(20);
  for (std::size_t i = 0; i < 20; ++i) {
    X(i, 0) = static_cast<double>(i) * 0.37 - 2.0;
    y[i] = 2.0 * X(i, 0) + 1.0;
  }
  const FittedModel m = fit(EstimatorSpec::defaults(ModelKind::kOls), X, y, 0);
  const auto& p = std::get<LinearParams>(m.params());
  EXPECT_NEAR(p.coef[0], 2.0, 1e-8);
  EXPECT_NEAR(p.intercept, 1.0, 1e-8);
  EXPECT_FALSE(m.diagnostics().ridge_fallback);
}

TEST(Ols, SingularDesignFallsBackToRidge) {
  Matrix X(10, 3);
  std::vector<double> y(10);
  for (std::size_t i = 0; i < 10; ++i) {
    X(i, 0) = static_cast<double>(i);
    X(i, 1) = 2.0 * static_cast<double>(i);  // collinear
    X(i, 2) = 4.0;                          // constant
    y[i] = 3.0 * static_cast<double>(i) + 1.0;
  }
  const FittedModel m = fit(EstimatorSpec::defaults(ModelKind::kOls), X, y, 0);
  EXPECT_TRUE(m.diagnostics().ridge_fallback);
  const auto pred = m.predict(X);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_TRUE(std::isfinite(pred[i]));
    EXPECT_NEAR(pred[i], y[i], 1e-6);
  }
}

TEST(Cart, MemorizesDistinctRows) {
  const Data d = noisy_data(300, 3, 1);
  const FittedModel m = fit(EstimatorSpec::defaults(ModelKind::kCart), d.X,
                            d.y, 0);
  EXPECT_EQ(mean_squared_error(d.y, m.predict(d.X)), 0.0);
}

TEST(Cart, RootSplitIsOptimal) {
  // Exhaustive oracle: every (feature, midpoint) candidate, child SSE.
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    Rng rng(seed + 100);
    const std::size_t n = 5 + seed % 26;
    const std::size_t dims = 1 + seed % 4;
    Matrix X(n, dims);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < dims; ++j) {
        X(i, j) = std::round(standard_normal(rng) * 3.0);
      }
      y[i] = std::round(standard_normal(rng) * 5.0);
    }
    EstimatorSpec spec = EstimatorSpec::defaults(ModelKind::kCart);
    spec.hyper.max_depth = 1;
    const FittedModel m = fit(spec, X, y, 0);
    const Tree& tree = *trees_of(m).trees[0].tree;

    double best = std::numeric_limits<double>::infinity();
    int best_feature = -1;
    double best_threshold = 0.0;
    for (std::size_t j = 0; j < dims; ++j) {
      std::set<double> values;
      for (std::size_t i = 0; i < n; ++i) values.insert(X(i, j));
      for (auto it = values.begin(); std::next(it) != values.end(); ++it) {
        const double t = (*it + *std::next(it)) / 2.0;
        double sl = 0, sr = 0, nl = 0, nr = 0;
        for (std::size_t i = 0; i < n; ++i) {
          (X(i, j) <= t ? sl : sr) += y[i];
          (X(i, j) <= t ? nl : nr) += 1;
        }
        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double mu = X(i, j) <= t ? sl / nl : sr / nr;
          sse += (y[i] - mu) * (y[i] - mu);
        }
        if (sse < best - 1e-9) {
          best = sse;
          best_feature = static_cast<int>(j);
          best_threshold = t;
        }
      }
    }
    const double ybar = mean(y);
    double total = 0.0;
    for (double v : y) total += (v - ybar) * (v - ybar);
    if (best_feature < 0 || total - best <= 1e-12 * total) {
      EXPECT_EQ(tree.size(), 1u) << "seed " << seed;
      continue;
    }
    ASSERT_EQ(tree.size(), 3u) << "seed " << seed;
    EXPECT_EQ(tree.node(0).feature, best_feature) << "seed " << seed;
    EXPECT_DOUBLE_EQ(tree.node(0).threshold, best_threshold) << "seed " << seed;
  }
}

TEST(Cart, TieBreakLowestFeatureThenThreshold) {
  // Two identical columns: the split must use feature 0.
  Matrix X{{1, 1}, {2, 2}, {3, 3}, {4, 4}};
  std::vector<double> y{0, 0, 1, 1};
  EstimatorSpec spec = EstimatorSpec::defaults(ModelKind::kCart);
  spec.hyper.max_depth = 1;
  const FittedModel m = fit(spec, X, y, 0);
  const Tree& t = *trees_of(m).trees[0].tree;
  EXPECT_EQ(t.node(0).feature, 0);
  EXPECT_EQ(t.node(0).threshold, 2.5);
  // Symmetric gains at 1.5 and 3.5: the lower threshold wins.
  Matrix X2{{1}, {2}, {3}, {4}};
  std::vector<double> y2{0, 1, 1, 0};
  const FittedModel m2 = fit(spec, X2, y2, 0);
  const Tree& t2 = *trees_of(m2).trees[0].tree;
  EXPECT_EQ(t2.node(0).threshold, 1.5);
}

TEST(Cart, CoverInvariants) {
  const Data d = noisy_data(200, 4, 2);
  EstimatorSpec spec = EstimatorSpec::defaults(ModelKind::kCart);
  spec.hyper.min_samples_leaf = 5;
  const FittedModel m = fit(spec, d.X, d.y, 0);
  const Tree& t = *trees_of(m).trees[0].tree;
  EXPECT_EQ(t.node(0).cover, 200.0);
  for (const auto& n : t.nodes()) {
    if (n.is_leaf()) {
      EXPECT_GE(n.cover, 5.0);
    } else {
      EXPECT_EQ(n.cover, t.node(n.left).cover + t.node(n.right).cover);
    }
  }
}

TEST(Poisson, RecoversLogRate) {
  Rng rng(11);
  const std::size_t n = 10000;
  Matrix X(n, 1);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    X(i, 0) = standard_normal(rng);
    const double rate = std::exp(0.5 * X(i, 0));
    // Knuth's multiplication method.
    const double limit = std::exp(-rate);
    double prod = uniform01(rng);
    int k = 0;
    while (prod > limit) {
      prod *= uniform01(rng);
      ++k;
    }
    y[i] = k;
  }
  const FittedModel m =
      fit(EstimatorSpec::defaults(ModelKind::kPoisson), X, y, 0);
  EXPECT_TRUE(m.diagnostics().converged);
  EXPECT_NEAR(std::get<LinearParams>(m.params()).coef[0], 0.5, 0.05);
  for (double p : m.predict(X)) EXPECT_GT(p, 0.0);
}

TEST(Poisson, EdgeCases) {
  Matrix X{{0}, {1}, {2}};
  EXPECT_THROW(fit(EstimatorSpec::defaults(ModelKind::kPoisson), X,
                   std::vector<double>{1, -1, 2}, 0),
               ArgumentError);
  const FittedModel zero = fit(EstimatorSpec::defaults(ModelKind::kPoisson), X,
                               std::vector<double>{0, 0, 0}, 0);
  EXPECT_FALSE(zero.diagnostics().converged);
  for (double p : zero.predict(X)) {
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1e-100);
  }
  EstimatorSpec capped = EstimatorSpec::defaults(ModelKind::kPoisson);
  capped.hyper.glm_max_iter = 1;
  const FittedModel one = fit(capped, X, std::vector<double>{1, 3, 9}, 0);
  EXPECT_FALSE(one.diagnostics().converged);
  EXPECT_EQ(one.diagnostics().iterations, 1u);
}

TEST(Predict, ConstantTargetAllKinds) {
  const Data d = noisy_data(50, 3, 3);
  const std::vector<double> y(50, 4.5);
  for (ModelKind k : kAllKinds) {
    const FittedModel m = fit(EstimatorSpec::defaults(k), d.X, y, 1);
    for (double p : m.predict(d.X)) {
      EXPECT_NEAR(p, 4.5, 1e-9) << to_string(k);
    }
  }
}

TEST(Predict, BoostingWithoutRoundsIsTheMean) {
  const Data d = noisy_data(40, 2, 4);
  EstimatorSpec spec = EstimatorSpec::defaults(ModelKind::kGradientBoosting);
  spec.hyper.n_rounds = 0;
  const FittedModel m = fit(spec, d.X, d.y, 0);
  for (double p : m.predict(d.X)) EXPECT_DOUBLE_EQ(p, mean(d.y));
}

TEST(Predict, SingleUnbootstrappedTreeForestEqualsCart) {
  for (std::size_t dims : {1u, 5u}) {
    const Data d = noisy_data(120, dims, 5);
    EstimatorSpec rf = EstimatorSpec::defaults(ModelKind::kRandomForest);
    rf.hyper.n_trees = 1;
    rf.hyper.bootstrap = false;
    rf.hyper.max_features = dims;
    const Data probe = noisy_data(80, dims, 6);
    const auto a = fit(rf, d.X, d.y, 9).predict(probe.X);
    const auto b =
        fit(EstimatorSpec::defaults(ModelKind::kCart), d.X, d.y, 9)
            .predict(probe.X);
    EXPECT_EQ(a, b);
  }
}

TEST(Predict, DimensionMismatch) {
  const Data d = noisy_data(30, 3, 7);
  for (ModelKind k : kAllKinds) {
    const FittedModel m =
        fit(EstimatorSpec::defaults(k), d.X, target_for(k, d.y), 0);
    EXPECT_THROW(m.predict(Matrix(2, 2)), ArgumentError);
    EXPECT_THROW(m.predict_row(std::vector<double>{1.0}), ArgumentError);
  }
}

TEST(Fit, RejectsTooFewRows) {
  Matrix X{{1.0}};
  for (ModelKind k : kAllKinds) {
    EXPECT_THROW(fit(EstimatorSpec::defaults(k), X, std::vector<double>{1}, 0),
                 ArgumentError);
  }
}

TEST(Fit, DeterministicGivenSeed) {
  const Data d = noisy_data(150, 4, 8);
  for (ModelKind k : kAllKinds) {
    const auto spec = EstimatorSpec::defaults(k);
    const auto y = target_for(k, d.y);
    EXPECT_TRUE(fit(spec, d.X, y, 77) == fit(spec, d.X, y, 77))
        << to_string(k);
  }
  const auto rf = EstimatorSpec::defaults(ModelKind::kRandomForest);
  EXPECT_FALSE(fit(rf, d.X, d.y, 1) == fit(rf, d.X, d.y, 2));
}

TEST(TreesOf, DecompositionIdentity) {
  const Data d = noisy_data(200, 4, 9);
  const Data probe = noisy_data(100, 4, 10);
  for (ModelKind k : kTreeKinds) {
    const FittedModel m = fit(EstimatorSpec::defaults(k), d.X, d.y, 3);
    const TreeDecomposition dec = trees_of(m);
    switch (k) {
      case ModelKind::kCart:
        ASSERT_EQ(dec.trees.size(), 1u);
        EXPECT_EQ(dec.trees[0].weight, 1.0);
        EXPECT_EQ(dec.offset, 0.0);
        break;
      case ModelKind::kRandomForest:
        ASSERT_EQ(dec.trees.size(), 100u);
        for (const auto& t : dec.trees) EXPECT_EQ(t.weight, 1.0 / 100);
        EXPECT_EQ(dec.offset, 0.0);
        break;
      default:
        ASSERT_EQ(dec.trees.size(), 100u);
        for (const auto& t : dec.trees) EXPECT_EQ(t.weight, 0.1);
        EXPECT_DOUBLE_EQ(dec.offset, mean(d.y));
    }
    const auto pred = m.predict(probe.X);
    for (std::size_t i = 0; i < probe.X.rows(); ++i) {
      double s = dec.offset;
      for (const auto& t : dec.trees) {
        s += t.weight * t.tree->predict(probe.X.row(i));
      }
      EXPECT_NEAR(pred[i], s, 1e-10);
      EXPECT_EQ(pred[i], m.predict_row(probe.X.row(i)));
    }
  }
  EXPECT_THROW(trees_of(fit(EstimatorSpec::defaults(ModelKind::kOls), d.X,
                            d.y, 0)),
               ArgumentError);
  EXPECT_THROW(trees_of(fit(EstimatorSpec::defaults(ModelKind::kPoisson), d.X,
                            std::vector<double>(200, 1.0), 0)),
               ArgumentError);
}

TEST(Boosting, ReducesTrainingError) {
  const Data d = noisy_data(300, 3, 12);
  EstimatorSpec s = EstimatorSpec::defaults(ModelKind::kGradientBoosting);
  s.hyper.n_rounds = 10;
  const double e10 = mean_squared_error(d.y, fit(s, d.X, d.y, 0).predict(d.X));
  s.hyper.n_rounds = 100;
  const double e100 = mean_squared_error(d.y, fit(s, d.X, d.y, 0).predict(d.X));
  EXPECT_LT(e100, e10);
  EXPECT_LT(e100, 0.5 * sample_std(d.y) * sample_std(d.y));
}

TEST(Serialization, JsonRoundTrip) {
  const Data d = noisy_data(100, 3, 13);
  for (ModelKind k : kAllKinds) {
    const FittedModel m =
        fit(EstimatorSpec::defaults(k), d.X, target_for(k, d.y), 4);
    const FittedModel back = model_from_json(model_to_json(m));
    EXPECT_TRUE(back == m) << to_string(k);
    EXPECT_EQ(back.predict(d.X), m.predict(d.X));
  }
  EXPECT_THROW(model_from_json("{}"), DataError);
  EXPECT_THROW(model_from_json("not json"), DataError);
  EXPECT_THROW(model_from_json(R"({"format":"bootmon-model","version":9})"),
               DataError);
}

}  // namespace
}  // namespace bootmon
