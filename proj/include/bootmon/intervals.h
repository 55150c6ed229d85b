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

#ifndef BOOTMON_INTERVALS_H_
#define BOOTMON_INTERVALS_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bootmon/data.h"
#include "bootmon/matrix.h"
#include "bootmon/models.h"

namespace bootmon {

enum class IntervalMethod { kDoubt, kNasa };

std::string_view to_string(IntervalMethod method);
IntervalMethod parse_interval_method(std::string_view name);

// One out-of-bag residual's origin: replica b and training row.
struct PoolOrigin {
  std::uint32_t replica;
  std::uint32_t row;
  friend bool operator==(const PoolOrigin&, const PoolOrigin&) = default;
};

struct EnsembleOptions {
  std::size_t jobs = 1;
  // When set, every replica's predictions on these rows are cached.
  const Matrix* query = nullptr;
  // Replicas can be dropped once the query predictions are cached, which
  // bounds memory for large forests. predict_interval then needs the cache.
  bool keep_replicas = true;
};

struct BootstrapEnsemble {
  EstimatorSpec spec;
  std::size_t n_train = 0;
  std::size_t dim = 0;
  std::vector<FittedModel> replicas;  // empty if keep_replicas was false
  std::vector<std::vector<std::size_t>> inbag;

  // y_i - full_model(x_i) over all training rows.
  std::vector<double> train_residual_pool;
  // y_i - replica_b(x_i) for every b and every row i outside inbag_b,
  // ordered by (b, i).
  std::vector<double> val_residual_pool;
  std::vector<PoolOrigin> val_pool_origin;

  double train_error = 0.0;  // mean squared train residual
  double val_error = 0.0;    // mean squared out-of-bag residual
  double no_info_error = 0.0;
  double overfitting_rate = 0.0;
  double val_weight = 0.632;
  bool rate_degenerate = false;  // rate clamped because of a degeneracy

  std::optional<FittedModel> full_model;

  // Query cache: query_replica_preds[b][i] = replica_b(query_i).
  std::vector<std::vector<double>> query_replica_preds;
  std::vector<double> query_point_preds;

  std::size_t size() const { return inbag.size(); }
  std::size_t query_rows() const { return query_point_preds.size(); }

  // replica_b(x0) for every b. Requires kept replicas.
  std::vector<double> replica_predictions(std::span<const double> x0) const;
  // replica_b(query_i) for every b, from the cache.
  std::vector<double> query_replica_predictions(std::size_t i) const;
};

BootstrapEnsemble fit_ensemble(const EstimatorSpec& spec, const Matrix& X,
                               std::span<const double> y, std::size_t B,
                               std::uint64_t seed,
                               const EnsembleOptions& options = {});

// m_b = mean over replicas - replica_b, given the replica predictions.
std::vector<double> centered_predictions(std::span<const double> preds);
std::vector<double> model_variance_samples(const BootstrapEnsemble& ensemble,
                                           std::span<const double> x0);

// (1/n^2) sum_i sum_j (y_i - p_j)^2 in O(n) via
// mean(y^2) - 2 mean(y) mean(p) + mean(p^2).
double no_info_error(std::span<const double> y, std::span<const double> preds);
// The double loop.
double no_info_error_naive(std::span<const double> y,
                           std::span<const double> preds);

// (val - train) / (no_info - train) in [0, 1]; 0 whenever val <= train or
// no_info <= train. `degenerate` reports those cases.
double overfitting_rate(double train_err, double val_err, double no_info_err,
                        bool* degenerate = nullptr);
double val_weight(double train_err, double val_err, double no_info_err);
double val_weight_from_rate(double rate);

struct PredictionWithInterval {
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double alpha = 0.0;
  double width() const { return upper - lower; }
};

// The sorted sample set C(x0) = {m_b(x0) + o_b} around a point prediction,
// from which intervals at any alpha can be read off.
struct IntervalSamples {
  double point = 0.0;
  std::vector<double> sorted;

  PredictionWithInterval at(double alpha) const;
};

// One signed residual per replica. Doubt draws from the out-of-bag pool with
// probability val_weight and from the training pool otherwise; NASA always
// draws from the training pool. Depends only on (pools, method, rng_seed).
std::vector<double> draw_residuals(const BootstrapEnsemble& ensemble,
                                   IntervalMethod method,
                                   std::uint64_t rng_seed);

IntervalSamples interval_samples(const BootstrapEnsemble& ensemble,
                                 double point,
                                 std::span<const double> replica_preds,
                                 IntervalMethod method, std::uint64_t rng_seed);

PredictionWithInterval predict_interval(const BootstrapEnsemble& ensemble,
                                        std::span<const double> x0,
                                        double alpha, std::uint64_t rng_seed);
PredictionWithInterval nasa_predict_interval(const BootstrapEnsemble& ensemble,
                                             std::span<const double> x0,
                                             double alpha,
                                             std::uint64_t rng_seed = 0);

enum class DrawSharing {
  kPerRow,  // row i draws with derive_seed(rng_seed, i)
  kShared,  // every row reuses the draws of rng_seed, so widths differ
            // between rows only through the replica predictions
};

std::vector<PredictionWithInterval> predict_intervals(
    const BootstrapEnsemble& ensemble, const Matrix& X, double alpha,
    std::uint64_t rng_seed, IntervalMethod method = IntervalMethod::kDoubt,
    DrawSharing sharing = DrawSharing::kPerRow);
// Same seeding as predict_intervals, over the cached query rows.
std::vector<IntervalSamples> query_interval_samples(
    const BootstrapEnsemble& ensemble, std::uint64_t rng_seed,
    IntervalMethod method = IntervalMethod::kDoubt,
    DrawSharing sharing = DrawSharing::kPerRow);

std::vector<double> alpha_grid();  // 0.75, 0.76, ..., 0.99

struct CoverageRow {
  std::string dataset;
  std::string model;
  std::string method;
  double alpha = 0.0;
  double coverage = 0.0;
  double abs_dev = 0.0;  // |coverage - alpha| * 100
};

struct CoverageAggregate {
  std::string model;
  std::string method;
  double mean = 0.0;
  double std = 0.0;  // sample std over (dataset, alpha) rows
  std::size_t count = 0;
};

struct CoverageReport {
  std::vector<CoverageRow> rows;
  std::vector<CoverageAggregate> aggregates;
  const CoverageAggregate* find(std::string_view model,
                                std::string_view method) const;
};

struct CoverageOptions {
  std::vector<double> alphas = alpha_grid();
  std::vector<IntervalMethod> methods = {IntervalMethod::kDoubt,
                                         IntervalMethod::kNasa};
  std::size_t bootstraps = 200;
  double test_fraction = 0.1;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::function<void(const std::string&)> log;
};

CoverageReport coverage_benchmark(const std::vector<DatasetTable>& datasets,
                                  const std::vector<EstimatorSpec>& specs,
                                  const CoverageOptions& options);

CoverageReport aggregate_coverage(std::vector<CoverageRow> rows);
std::string coverage_csv(const CoverageReport& report);
std::string coverage_json(const CoverageReport& report);

}  // namespace bootmon

#endif  // BOOTMON_INTERVALS_H_
