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

#ifndef BOOTMON_MONITOR_H_
#define BOOTMON_MONITOR_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bootmon/data.h"
#include "bootmon/intervals.h"
#include "bootmon/matrix.h"
#include "bootmon/models.h"

namespace bootmon {

enum class MonitorMethod { kDoubt, kKs, kPsi };

std::string_view to_string(MonitorMethod method);
MonitorMethod parse_monitor_method(std::string_view name);

// Two-sample Kolmogorov-Smirnov distance sup_x |F_ref(x) - F_sample(x)|.
double ks_statistic(std::span<const double> ref,
                    std::span<const double> sample);

// Population stability index over `n_bins` equal-mass bins of `ref`, with
// proportions floored at 1e-4 and renormalised. `degenerate` is set when
// repeated reference values collapse some bin edges.
double psi(std::span<const double> ref, std::span<const double> sample,
           std::size_t n_bins = 10, bool* degenerate = nullptr);

constexpr double kPsiFloor = 1e-4;

// Sorted reference columns and PSI bins, prepared once per training section.
class DriftReference {
 public:
  DriftReference(const Matrix& train_X, std::size_t n_bins = 10);

  std::size_t dims() const { return sorted_.size(); }
  double ks(std::size_t feature, std::span<const double> sample) const;
  double psi(std::size_t feature, std::span<const double> sample) const;
  bool degenerate(std::size_t feature) const { return degenerate_[feature]; }
  // Unweighted mean of the per-feature statistic.
  double monitor_value(const Matrix& window_X, MonitorMethod method) const;

 private:
  std::vector<std::vector<double>> sorted_;
  std::vector<std::vector<double>> edges_;
  std::vector<std::vector<double>> ref_props_;
  std::vector<bool> degenerate_;
};

// Mean interval width at `alpha` over the window rows, all rows sharing the
// residual draws of `rng_seed`.
double uncertainty_monitor_value(const BootstrapEnsemble& ensemble,
                                 const Matrix& window_X, double alpha,
                                 std::uint64_t rng_seed);

double drift_monitor_value(const Matrix& train_X, const Matrix& window_X,
                           MonitorMethod method);

double window_mse(const FittedModel& full_model, const Matrix& window_X,
                  std::span<const double> window_y);

// (v - mean) / population std. A constant vector maps to zeros and sets
// `constant`.
std::vector<double> standardize(std::span<const double> v,
                                bool* constant = nullptr);

enum class Section { kLower, kTrain, kUpper, kMixed };
std::string_view to_string(Section section);

// Tags each window of the sorted order by the section containing all of its
// rows, given the lower/train section sizes.
std::vector<Section> tag_windows(const WindowPlan& plan, std::size_t n_lower,
                                 std::size_t n_train, std::size_t n_upper);

struct MonitorSeries {
  std::string dataset;
  std::string feature;
  std::string model;
  std::string method;
  std::vector<WindowRange> window_ranges;
  std::vector<Section> sections;
  std::vector<double> raw_monitor;
  std::vector<double> raw_mse;
  std::vector<double> z_monitor;
  std::vector<double> z_mse;
  bool constant_monitor = false;
  bool constant_mse = false;

  // Fills the z-vectors from the raw vectors.
  void standardize_all();
};

// Mean |z_monitor - z_mse| over windows tagged lower or upper. Throws
// ArgumentError when no window lies entirely outside the training section.
double deterioration_score(const MonitorSeries& series);

struct MonitorCell {
  std::string dataset;
  std::string feature;
  std::string model;
  std::string method;
  double score = 0.0;
  std::size_t ood_windows = 0;
};

struct MonitorScore {
  std::string dataset;  // empty for cross-dataset aggregates
  std::string model;
  std::string method;
  double mean = 0.0;
  double std = 0.0;  // sample std over features (per dataset) or datasets
  std::size_t count = 0;
};

struct ScoreReport {
  std::vector<MonitorCell> cells;
  std::vector<MonitorScore> per_dataset;
  std::vector<MonitorScore> aggregates;
  std::vector<std::string> skipped;  // "dataset/feature/model: reason"

  const MonitorScore* find(std::string_view model,
                           std::string_view method) const;
};

struct MonitorOptions {
  std::vector<MonitorMethod> methods = {MonitorMethod::kDoubt,
                                        MonitorMethod::kKs,
                                        MonitorMethod::kPsi};
  std::size_t window = 50;
  std::size_t stride = 1;
  std::size_t bootstraps = 50;
  double alpha = 0.95;
  std::size_t psi_bins = 10;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  // Restricts the sort features; empty means every numeric feature.
  std::vector<std::string> features;
  std::function<void(const std::string&)> log;
};

// Every (dataset, numeric feature, model, method) cell: sort by the feature,
// train on the middle third, sweep the windows and score.
ScoreReport run_monitor_benchmark(const std::vector<DatasetTable>& datasets,
                                  const std::vector<EstimatorSpec>& specs,
                                  const MonitorOptions& options,
                                  std::vector<MonitorSeries>* series = nullptr);

ScoreReport aggregate_scores(std::vector<MonitorCell> cells,
                             std::vector<std::string> skipped);

std::string series_csv(const MonitorSeries& series);
std::string series_filename(const MonitorSeries& series);
std::string scores_csv(const ScoreReport& report);
std::string cells_csv(const ScoreReport& report);
std::string scores_json(const ScoreReport& report);

}  // namespace bootmon

#endif  // BOOTMON_MONITOR_H_
