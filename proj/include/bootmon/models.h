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

#ifndef BOOTMON_MODELS_H_
#define BOOTMON_MODELS_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "bootmon/matrix.h"
#include "bootmon/tree.h"

namespace bootmon {

enum class ModelKind { kOls, kPoisson, kCart, kRandomForest, kGradientBoosting };

std::string_view to_string(ModelKind kind);
// Accepts the canonical names ("ols", "poisson", "cart", "random_forest",
// "gradient_boosting"). Throws ArgumentError otherwise.
ModelKind parse_model_kind(std::string_view name);
bool is_tree_based(ModelKind kind);

struct Hyperparameters {
  std::size_t max_depth = 0;  // 0: unlimited
  std::size_t min_samples_leaf = 1;
  std::size_t n_trees = 100;
  std::size_t max_features = 0;  // random_forest; 0: ceil(d / 3)
  bool bootstrap = true;         // random_forest per-tree resampling
  double learning_rate = 0.1;
  std::size_t n_rounds = 100;
  double l2_ridge = 1e-10;
  std::size_t glm_max_iter = 100;
  double glm_tol = 1e-8;

  friend bool operator==(const Hyperparameters&,
                         const Hyperparameters&) = default;
};

struct EstimatorSpec {
  ModelKind kind = ModelKind::kOls;
  Hyperparameters hyper;

  // Frozen per-kind defaults.
  static EstimatorSpec defaults(ModelKind kind);

  // Plain "key = value" block; unknown keys are rejected, missing keys keep
  // the per-kind default.
  std::string to_config() const;
  static EstimatorSpec from_config(std::string_view text);

  friend bool operator==(const EstimatorSpec&, const EstimatorSpec&) = default;
};

struct LinearParams {
  double intercept = 0.0;
  std::vector<double> coef;
  friend bool operator==(const LinearParams&, const LinearParams&) = default;
};

struct TreeEnsembleParams {
  double offset = 0.0;
  std::vector<Tree> trees;
  std::vector<double> weights;
  friend bool operator==(const TreeEnsembleParams&,
                         const TreeEnsembleParams&) = default;
};

struct FitDiagnostics {
  bool ridge_fallback = false;  // normal equations were singular
  bool converged = true;        // IRLS reached glm_tol
  std::size_t iterations = 0;
  friend bool operator==(const FitDiagnostics&,
                         const FitDiagnostics&) = default;
};

class FittedModel {
 public:
  FittedModel(EstimatorSpec spec, std::size_t train_dim,
              std::variant<LinearParams, TreeEnsembleParams> params,
              FitDiagnostics diagnostics = {});

  const EstimatorSpec& spec() const { return spec_; }
  std::size_t train_dim() const { return train_dim_; }
  const FitDiagnostics& diagnostics() const { return diagnostics_; }
  const std::variant<LinearParams, TreeEnsembleParams>& params() const {
    return params_;
  }

  double predict_row(std::span<const double> x) const;
  std::vector<double> predict(const Matrix& X) const;

  friend bool operator==(const FittedModel&, const FittedModel&) = default;

 private:
  EstimatorSpec spec_;
  std::size_t train_dim_;
  std::variant<LinearParams, TreeEnsembleParams> params_;
  FitDiagnostics diagnostics_;
};

FittedModel fit(const EstimatorSpec& spec, const Matrix& X,
                std::span<const double> y, std::uint64_t seed);

// Fits on the multiset `rows` of (X, y). `presorted`, when given, must be the
// ColumnOrder of X; tree learners reuse it instead of sorting again.
FittedModel fit_rows(const EstimatorSpec& spec, const Matrix& X,
                     std::span<const double> y,
                     std::span<const std::size_t> rows, std::uint64_t seed,
                     const ColumnOrder* presorted = nullptr);

std::vector<double> predict(const FittedModel& model, const Matrix& X);

struct WeightedTree {
  const Tree* tree;
  double weight;
};

// prediction(x) == offset + sum_t weight_t * tree_t(x) for tree-based models.
struct TreeDecomposition {
  double offset = 0.0;
  std::vector<WeightedTree> trees;
};

// Throws ArgumentError for ols/poisson. The returned pointers borrow from
// `model`.
TreeDecomposition trees_of(const FittedModel& model);

// Versioned JSON document.
std::string model_to_json(const FittedModel& model);
FittedModel model_from_json(std::string_view text);

}  // namespace bootmon

#endif  // BOOTMON_MODELS_H_
