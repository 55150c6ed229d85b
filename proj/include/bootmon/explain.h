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

#ifndef BOOTMON_EXPLAIN_H_
#define BOOTMON_EXPLAIN_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bootmon/data.h"
#include "bootmon/intervals.h"
#include "bootmon/matrix.h"
#include "bootmon/models.h"
#include "bootmon/tree.h"

namespace bootmon {

// Per-row interval widths at `alpha`, all rows sharing the residual draws of
// `rng_seed`.
std::vector<double> uncertainty_targets(const BootstrapEnsemble& ensemble,
                                        const Matrix& X_val, double alpha,
                                        std::uint64_t rng_seed);

struct SurrogateExplainer {
  FittedModel surrogate;
  std::string trained_on;
  double fit_quality = 0.0;  // holdout R^2
  bool constant_targets = false;
};

// Fits `spec` (tree-based) on 80% of the rows and scores R^2 on the rest.
SurrogateExplainer fit_surrogate(const Matrix& X,
                                 std::span<const double> widths,
                                 const EstimatorSpec& spec, std::uint64_t seed);

struct ShapValues {
  double base = 0.0;
  std::vector<double> phi;
};

// Path-dependent TreeSHAP of a single tree.
ShapValues tree_shap(const Tree& tree, std::span<const double> x);
// Weighted sum over the trees of a tree-based model, plus its offset.
ShapValues tree_shap(const FittedModel& model, std::span<const double> x);
ShapValues tree_shap(const SurrogateExplainer& explainer,
                     std::span<const double> x);

// Cover-weighted mean of the leaves.
double expected_value(const Tree& tree);

// Shapley values by enumeration of every feature subset, with absent
// features marginalised by cover-weighted descent. d <= 15.
ShapValues exact_shap_oracle(const Tree& tree, std::span<const double> x);

struct ShapReport {
  double base_value = 0.0;
  Matrix contributions;  // rows x features
  std::vector<std::string> feature_names;
  std::vector<double> predictions;
  // max_i |base + sum_j phi_ij - prediction_i| / max(1, |prediction_i|)
  double max_efficiency_error = 0.0;
};

ShapReport explain_rows(const SurrogateExplainer& explainer, const Matrix& X,
                        std::vector<std::string> feature_names,
                        std::size_t jobs = 1);

// Mean |phi| per feature.
std::vector<double> global_importance(const ShapReport& report);
// Feature indices by decreasing importance, ties by index.
std::vector<std::size_t> importance_ranking(std::span<const double> importance);

// (feature, contribution) for one row, by decreasing |contribution|, ties by
// feature index.
std::vector<std::pair<std::string, double>> local_explanation(
    const ShapReport& report, std::size_t row);

struct AttributionOptions {
  std::vector<std::string> substantive = {"GrLivArea", "TotalBsmtSF"};
  std::string noise_feature = "random_noise";
  double k_std = 5.0;
  double alpha = 0.95;
  std::size_t bootstraps = 200;
  double validation_fraction = 0.5;
  EstimatorSpec model = EstimatorSpec::defaults(ModelKind::kGradientBoosting);
  EstimatorSpec surrogate =
      EstimatorSpec::defaults(ModelKind::kGradientBoosting);
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::function<void(const std::string&)> log;
};

struct FeatureAttribution {
  std::string feature;
  bool shifted = false;
  double shap_importance = 0.0;
  double ks = 0.0;
  double psi = 0.0;
  double ks_baseline = 0.0;   // train vs unshifted validation
  double psi_baseline = 0.0;
};

struct AttributionReport {
  std::string dataset;
  std::vector<FeatureAttribution> features;
  std::vector<std::string> shifted_features;
  double k_std = 0.0;
  double alpha = 0.0;
  std::size_t train_rows = 0;
  std::size_t validation_rows = 0;
  double model_r2 = 0.0;  // deteriorating model on unshifted validation
  double surrogate_r2 = 0.0;
  bool surrogate_constant_targets = false;
  double mean_width_unshifted = 0.0;
  double mean_width_shifted = 0.0;
  double max_efficiency_error = 0.0;
  std::size_t local_row = 0;  // validation row with the largest prediction
  double local_prediction = 0.0;
  std::vector<double> local_values;  // shifted feature values of that row
  std::vector<std::pair<std::string, double>> local;
  ShapReport shap;
};

// Appends the noise feature, splits, fits the deteriorating model's
// ensemble, shifts the substantive and noise features of the validation part
// by k_std standard deviations and explains the resulting interval widths.
AttributionReport run_drift_attribution(const DatasetTable& ds,
                                        const AttributionOptions& options);

std::string attribution_json(const AttributionReport& report);
std::string local_explanation_json(const AttributionReport& report);
// Global importance plot data: feature, shap_importance, ks, psi, shifted.
std::string figure2_csv(const AttributionReport& report);
// Local explanation plot data: rank, feature, value, contribution.
std::string figure3_csv(const AttributionReport& report);

}  // namespace bootmon

#endif  // BOOTMON_EXPLAIN_H_
