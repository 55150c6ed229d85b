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

#include "bootmon/intervals.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "bootmon/error.h"
#include "bootmon/random.h"
#include "bootmon/stats.h"

namespace bootmon {

namespace {

constexpr std::size_t kMaxRedraws = 100;

// Runs task(i) for i in [0, n) on up to `jobs` threads. Exceptions are
// rethrown for the lowest failing index.
template <typename Task>
void parallel_for(std::size_t n, std::size_t jobs, Task task) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(jobs);
  for (std::size_t t = 0; t < jobs; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

double mean_square(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s / static_cast<double>(v.size());
}

struct ReplicaResult {
  std::vector<std::size_t> inbag;
  std::optional<FittedModel> model;
  std::vector<double> oob_residuals;
  std::vector<std::uint32_t> oob_rows;
  std::vector<double> query_preds;
};

}  // namespace

std::string_view to_string(IntervalMethod method) {
  return method == IntervalMethod::kDoubt ? "doubt" : "nasa";
}

IntervalMethod parse_interval_method(std::string_view name) {
  if (name == "doubt") return IntervalMethod::kDoubt;
  if (name == "nasa") return IntervalMethod::kNasa;
  throw ArgumentError("unknown interval method '" + std::string(name) + "'");
}

std::vector<double> BootstrapEnsemble::replica_predictions(
    std::span<const double> x0) const {
  if (replicas.size() != size()) {
    throw ArgumentError("ensemble replicas were not kept; use the query cache");
  }
  if (x0.size() != dim) {
    throw ArgumentError("ensemble: expected " + std::to_string(dim) +
                        " features, got " + std::to_string(x0.size()));
  }
  std::vector<double> out(replicas.size());
  for (std::size_t b = 0; b < replicas.size(); ++b) {
    out[b] = replicas[b].predict_row(x0);
  }
  return out;
}

std::vector<double> BootstrapEnsemble::query_replica_predictions(
    std::size_t i) const {
  if (i >= query_rows()) throw ArgumentError("query row out of range");
  std::vector<double> out(query_replica_preds.size());
  for (std::size_t b = 0; b < out.size(); ++b) {
    out[b] = query_replica_preds[b][i];
  }
  return out;
}

BootstrapEnsemble fit_ensemble(const EstimatorSpec& spec, const Matrix& X,
                               std::span<const double> y, std::size_t B,
                               std::uint64_t seed,
                               const EnsembleOptions& options) {
  const std::size_t n = X.rows();
  if (B < 2) throw ArgumentError("fit_ensemble: need B >= 2");
  if (n < 2) throw ArgumentError("fit_ensemble: need N >= 2");
  if (y.size() != n) throw ArgumentError("fit_ensemble: X/y length mismatch");
  if (options.query != nullptr && options.query->cols() != X.cols()) {
    throw ArgumentError("fit_ensemble: query dimension mismatch");
  }

  std::optional<ColumnOrder> order;
  if (is_tree_based(spec.kind)) order.emplace(X);
  const ColumnOrder* presorted = order ? &*order : nullptr;

  BootstrapEnsemble ens;
  ens.spec = spec;
  ens.n_train = n;
  ens.dim = X.cols();

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  ens.full_model.emplace(
      fit_rows(spec, X, y, all, derive_seed(seed, "full"), presorted));
  const std::vector<double> full_preds = ens.full_model->predict(X);
  ens.train_residual_pool.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ens.train_residual_pool[i] = y[i] - full_preds[i];
  }

  std::vector<ReplicaResult> results(B);
  parallel_for(B, options.jobs, [&](std::size_t b) {
    ReplicaResult& r = results[b];
    Rng rng(derive_seed(seed, "inbag", b));
    std::vector<char> in(n);
    for (std::size_t attempt = 0;; ++attempt) {
      if (attempt == kMaxRedraws) {
        throw ArgumentError(
            "fit_ensemble: bootstrap sample without out-of-bag rows after " +
            std::to_string(kMaxRedraws) + " draws");
      }
      r.inbag.resize(n);
      std::fill(in.begin(), in.end(), 0);
      for (auto& idx : r.inbag) {
        idx = uniform_index(rng, n);
        in[idx] = 1;
      }
      if (std::find(in.begin(), in.end(), 0) != in.end()) break;
    }
    FittedModel model = fit_rows(spec, X, y, r.inbag,
                                 derive_seed(seed, "replica", b), presorted);
    for (std::size_t i = 0; i < n; ++i) {
      if (in[i]) continue;
      r.oob_rows.push_back(static_cast<std::uint32_t>(i));
      r.oob_residuals.push_back(y[i] - model.predict_row(X.row(i)));
    }
    if (options.query != nullptr) r.query_preds = model.predict(*options.query);
    if (options.keep_replicas) r.model.emplace(std::move(model));
  });

  for (std::size_t b = 0; b < B; ++b) {
    ReplicaResult& r = results[b];
    ens.inbag.push_back(std::move(r.inbag));
    if (r.model) ens.replicas.push_back(std::move(*r.model));
    for (std::size_t k = 0; k < r.oob_rows.size(); ++k) {
      ens.val_residual_pool.push_back(r.oob_residuals[k]);
      ens.val_pool_origin.push_back(
          {static_cast<std::uint32_t>(b), r.oob_rows[k]});
    }
    if (options.query != nullptr) {
      ens.query_replica_preds.push_back(std::move(r.query_preds));
    }
  }

  ens.train_error = mean_square(ens.train_residual_pool);
  ens.val_error = mean_square(ens.val_residual_pool);
  ens.no_info_error = no_info_error(y, full_preds);
  ens.overfitting_rate =
      overfitting_rate(ens.train_error, ens.val_error, ens.no_info_error,
                       &ens.rate_degenerate);
  ens.val_weight = val_weight_from_rate(ens.overfitting_rate);
  if (options.query != nullptr) {
    ens.query_point_preds = ens.full_model->predict(*options.query);
  }
  return ens;
}

std::vector<double> centered_predictions(std::span<const double> preds) {
  if (preds.empty()) throw ArgumentError("centered_predictions: empty input");
  const double avg = mean(preds);
  std::vector<double> m(preds.size());
  for (std::size_t b = 0; b < preds.size(); ++b) m[b] = avg - preds[b];
  return m;
}

std::vector<double> model_variance_samples(const BootstrapEnsemble& ensemble,
                                           std::span<const double> x0) {
  return centered_predictions(ensemble.replica_predictions(x0));
}

double no_info_error(std::span<const double> y,
                     std::span<const double> preds) {
  if (y.size() != preds.size()) {
    throw ArgumentError("no_info_error: length mismatch");
  }
  if (y.empty()) throw ArgumentError("no_info_error: empty input");
  const auto n = static_cast<double>(y.size());
  double sy = 0.0, syy = 0.0, sp = 0.0, spp = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sy += y[i];
    syy += y[i] * y[i];
    sp += preds[i];
    spp += preds[i] * preds[i];
  }
  const double value = syy / n - 2.0 * (sy / n) * (sp / n) + spp / n;
  return std::max(0.0, value);
}

double no_info_error_naive(std::span<const double> y,
                           std::span<const double> preds) {
  if (y.size() != preds.size()) {
    throw ArgumentError("no_info_error: length mismatch");
  }
  if (y.empty()) throw ArgumentError("no_info_error: empty input");
  double s = 0.0;
  for (double yi : y) {
    for (double pj : preds) s += (yi - pj) * (yi - pj);
  }
  const auto n = static_cast<double>(y.size());
  return s / (n * n);
}

double overfitting_rate(double train_err, double val_err, double no_info_err,
                        bool* degenerate) {
  const bool bad = !(val_err > train_err) || !(no_info_err > train_err);
  if (degenerate != nullptr) *degenerate = bad;
  if (bad) return 0.0;
  return std::min(1.0, (val_err - train_err) / (no_info_err - train_err));
}

double val_weight_from_rate(double rate) {
  rate = std::clamp(rate, 0.0, 1.0);
  return 0.632 / (1.0 - 0.368 * rate);
}

double val_weight(double train_err, double val_err, double no_info_err) {
  return val_weight_from_rate(
      overfitting_rate(train_err, val_err, no_info_err));
}

PredictionWithInterval IntervalSamples::at(double alpha) const {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ArgumentError("alpha must lie in (0, 1)");
  }
  PredictionWithInterval out;
  out.alpha = alpha;
  out.point = point;
  out.lower = point + quantile_sorted(sorted, (1.0 - alpha) / 2.0);
  out.upper = point + quantile_sorted(sorted, (1.0 + alpha) / 2.0);
  return out;
}

std::vector<double> draw_residuals(const BootstrapEnsemble& ensemble,
                                   IntervalMethod method,
                                   std::uint64_t rng_seed) {
  const auto& train = ensemble.train_residual_pool;
  const auto& val = ensemble.val_residual_pool;
  Rng rng(rng_seed);
  std::vector<double> o(ensemble.size());
  for (auto& v : o) {
    const bool from_val = method == IntervalMethod::kDoubt &&
                          uniform01(rng) < ensemble.val_weight;
    const auto& pool = from_val ? val : train;
    v = pool[uniform_index(rng, pool.size())];
  }
  return o;
}

IntervalSamples interval_samples(const BootstrapEnsemble& ensemble,
                                 double point,
                                 std::span<const double> replica_preds,
                                 IntervalMethod method,
                                 std::uint64_t rng_seed) {
  if (replica_preds.size() != ensemble.size()) {
    throw ArgumentError("interval_samples: need one prediction per replica");
  }
  IntervalSamples s;
  s.point = point;
  s.sorted = centered_predictions(replica_preds);
  const std::vector<double> o = draw_residuals(ensemble, method, rng_seed);
  for (std::size_t b = 0; b < o.size(); ++b) s.sorted[b] += o[b];
  std::sort(s.sorted.begin(), s.sorted.end());
  return s;
}

namespace {

PredictionWithInterval interval_at(const BootstrapEnsemble& ensemble,
                                   std::span<const double> x0, double alpha,
                                   std::uint64_t rng_seed,
                                   IntervalMethod method) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ArgumentError("alpha must lie in (0, 1)");
  }
  const std::vector<double> preds = ensemble.replica_predictions(x0);
  const double point = ensemble.full_model->predict_row(x0);
  return interval_samples(ensemble, point, preds, method, rng_seed).at(alpha);
}

std::uint64_t row_seed(std::uint64_t rng_seed, std::size_t row,
                       DrawSharing sharing) {
  return sharing == DrawSharing::kShared ? rng_seed
                                         : derive_seed(rng_seed, row);
}

}  // namespace

PredictionWithInterval predict_interval(const BootstrapEnsemble& ensemble,
                                        std::span<const double> x0,
                                        double alpha, std::uint64_t rng_seed) {
  return interval_at(ensemble, x0, alpha, rng_seed, IntervalMethod::kDoubt);
}

PredictionWithInterval nasa_predict_interval(const BootstrapEnsemble& ensemble,
                                             std::span<const double> x0,
                                             double alpha,
                                             std::uint64_t rng_seed) {
  return interval_at(ensemble, x0, alpha, rng_seed, IntervalMethod::kNasa);
}

std::vector<PredictionWithInterval> predict_intervals(
    const BootstrapEnsemble& ensemble, const Matrix& X, double alpha,
    std::uint64_t rng_seed, IntervalMethod method, DrawSharing sharing) {
  std::vector<PredictionWithInterval> out;
  out.reserve(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) {
    out.push_back(interval_at(ensemble, X.row(i), alpha,
                              row_seed(rng_seed, i, sharing), method));
  }
  return out;
}

std::vector<IntervalSamples> query_interval_samples(
    const BootstrapEnsemble& ensemble, std::uint64_t rng_seed,
    IntervalMethod method, DrawSharing sharing) {
  std::vector<IntervalSamples> out;
  out.reserve(ensemble.query_rows());
  for (std::size_t i = 0; i < ensemble.query_rows(); ++i) {
    out.push_back(interval_samples(
        ensemble, ensemble.query_point_preds[i],
        ensemble.query_replica_predictions(i), method,
        row_seed(rng_seed, i, sharing)));
  }
  return out;
}

std::vector<double> alpha_grid() {
  std::vector<double> a;
  for (int pct = 75; pct <= 99; ++pct) a.push_back(pct / 100.0);
  return a;
}

const CoverageAggregate* CoverageReport::find(std::string_view model,
                                              std::string_view method) const {
  for (const auto& a : aggregates) {
    if (a.model == model && a.method == method) return &a;
  }
  return nullptr;
}

CoverageReport coverage_benchmark(const std::vector<DatasetTable>& datasets,
                                  const std::vector<EstimatorSpec>& specs,
                                  const CoverageOptions& options) {
  for (double alpha : options.alphas) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
      throw ArgumentError("alpha must lie in (0, 1)");
    }
  }
  std::vector<CoverageRow> rows;
  for (const auto& ds : datasets) {
    const RowSplit split = random_split_indices(
        ds.rows(), options.test_fraction, derive_seed(options.seed, ds.name));
    const Matrix X_train = ds.features.select_rows(split.train_idx);
    const Matrix X_test = ds.features.select_rows(split.test_idx);
    const std::vector<double> y_train =
        select<double>(ds.target, split.train_idx);
    const std::vector<double> y_test =
        select<double>(ds.target, split.test_idx);
    for (const auto& spec : specs) {
      const std::string model(to_string(spec.kind));
      if (options.log) options.log("coverage: " + ds.name + " / " + model);
      const std::uint64_t cell_seed = derive_seed(options.seed, ds.name, model);
      EnsembleOptions eo;
      eo.jobs = options.jobs;
      eo.query = &X_test;
      eo.keep_replicas = false;
      const BootstrapEnsemble ens = fit_ensemble(
          spec, X_train, y_train, options.bootstraps, cell_seed, eo);
      for (IntervalMethod method : options.methods) {
        const std::string method_name(to_string(method));
        const auto samples = query_interval_samples(
            ens, derive_seed(cell_seed, method_name), method);
        for (double alpha : options.alphas) {
          std::size_t hits = 0;
          for (std::size_t i = 0; i < samples.size(); ++i) {
            const auto iv = samples[i].at(alpha);
            if (iv.lower <= y_test[i] && y_test[i] <= iv.upper) ++hits;
          }
          CoverageRow row;
          row.dataset = ds.name;
          row.model = model;
          row.method = method_name;
          row.alpha = alpha;
          row.coverage =
              static_cast<double>(hits) / static_cast<double>(samples.size());
          row.abs_dev = std::abs(row.coverage - alpha) * 100.0;
          rows.push_back(std::move(row));
        }
      }
    }
  }
  return aggregate_coverage(std::move(rows));
}

CoverageReport aggregate_coverage(std::vector<CoverageRow> rows) {
  CoverageReport report;
  std::vector<std::pair<std::string, std::string>> keys;
  std::map<std::pair<std::string, std::string>, std::vector<double>> groups;
  for (const auto& r : rows) {
    auto key = std::make_pair(r.model, r.method);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) keys.push_back(key);
    it->second.push_back(r.abs_dev);
  }
  for (const auto& key : keys) {
    const auto& v = groups[key];
    report.aggregates.push_back(
        {key.first, key.second, mean(v), sample_std(v), v.size()});
  }
  report.rows = std::move(rows);
  return report;
}

std::string coverage_csv(const CoverageReport& report) {
  std::ostringstream out;
  out << "dataset,model,method,alpha,coverage,abs_dev\n";
  for (const auto& r : report.rows) {
    out << r.dataset << ',' << r.model << ',' << r.method << ','
        << format_double(r.alpha) << ',' << format_double(r.coverage) << ','
        << format_double(r.abs_dev) << '\n';
  }
  return out.str();
}

std::string coverage_json(const CoverageReport& report) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["metric"] = "mean |coverage - alpha| * 100";
  ordered_json table = ordered_json::object();
  for (const auto& a : report.aggregates) {
    table[a.model][a.method] = {{"mean", a.mean}, {"std", a.std},
                                {"count", a.count}};
  }
  doc["table"] = table;
  ordered_json per_dataset = ordered_json::object();
  std::map<std::tuple<std::string, std::string, std::string>,
           std::vector<double>>
      cells;
  std::vector<std::tuple<std::string, std::string, std::string>> order;
  for (const auto& r : report.rows) {
    auto key = std::make_tuple(r.dataset, r.model, r.method);
    auto [it, inserted] = cells.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(r.abs_dev);
  }
  for (const auto& key : order) {
    const auto& [dataset, model, method] = key;
    per_dataset[dataset][model][method] = mean(cells[key]);
  }
  doc["per_dataset"] = per_dataset;
  return doc.dump(2) + "\n";
}

}  // namespace bootmon
