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

#include "bootmon/monitor.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>
#include <tuple>

#include "json.hpp"

#include "bootmon/error.h"
#include "bootmon/random.h"
#include "bootmon/stats.h"

namespace bootmon {

namespace {

// sup |F_ref - F_sample| with `ref` sorted. Both ECDFs are step functions, so
// the supremum is reached at a sample point or just left of one.
double ks_sorted_ref(std::span<const double> ref, std::vector<double> sample) {
  if (ref.empty() || sample.empty()) {
    throw ArgumentError("ks_statistic: empty input");
  }
  std::sort(sample.begin(), sample.end());
  const auto n = static_cast<double>(ref.size());
  const auto m = static_cast<double>(sample.size());
  double d = 0.0;
  std::size_t i = 0;
  while (i < sample.size()) {
    const double s = sample[i];
    std::size_t j = i;
    while (j < sample.size() && sample[j] == s) ++j;
    const auto below = static_cast<double>(
        std::lower_bound(ref.begin(), ref.end(), s) - ref.begin());
    const auto at_or_below = static_cast<double>(
        std::upper_bound(ref.begin(), ref.end(), s) - ref.begin());
    d = std::max(d, std::abs(below / n - static_cast<double>(i) / m));
    d = std::max(d, std::abs(at_or_below / n - static_cast<double>(j) / m));
    i = j;
  }
  return d;
}

// Interior bin edges: unique type-7 quantiles of `sorted` at k / n_bins.
std::vector<double> psi_edges(std::span<const double> sorted,
                              std::size_t n_bins) {
  std::vector<double> edges;
  for (std::size_t k = 1; k < n_bins; ++k) {
    const double e = quantile_sorted(
        sorted, static_cast<double>(k) / static_cast<double>(n_bins));
    if (edges.empty() || e > edges.back()) edges.push_back(e);
  }
  return edges;
}

// Bin i holds values in (edge[i-1], edge[i]]; outer edges are infinite.
std::vector<double> bin_proportions(std::span<const double> values,
                                    std::span<const double> edges) {
  std::vector<double> p(edges.size() + 1, 0.0);
  for (double v : values) {
    const auto bin = std::lower_bound(edges.begin(), edges.end(), v) -
                     edges.begin();
    p[static_cast<std::size_t>(bin)] += 1.0;
  }
  double total = 0.0;
  for (auto& x : p) {
    x = std::max(x / static_cast<double>(values.size()), kPsiFloor);
    total += x;
  }
  for (auto& x : p) x /= total;
  return p;
}

double psi_from_props(std::span<const double> p, std::span<const double> q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    s += (p[i] - q[i]) * std::log(p[i] / q[i]);
  }
  return s;
}

template <typename Task>
void parallel_for(std::size_t n, std::size_t jobs, Task task) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
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
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < jobs; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

std::string_view to_string(MonitorMethod method) {
  switch (method) {
    case MonitorMethod::kDoubt:
      return "doubt";
    case MonitorMethod::kKs:
      return "ks";
    case MonitorMethod::kPsi:
      return "psi";
  }
  return "unknown";
}

MonitorMethod parse_monitor_method(std::string_view name) {
  for (MonitorMethod m :
       {MonitorMethod::kDoubt, MonitorMethod::kKs, MonitorMethod::kPsi}) {
    if (to_string(m) == name) return m;
  }
  throw ArgumentError("unknown monitor method '" + std::string(name) + "'");
}

double ks_statistic(std::span<const double> ref,
                    std::span<const double> sample) {
  std::vector<double> sorted(ref.begin(), ref.end());
  std::sort(sorted.begin(), sorted.end());
  return ks_sorted_ref(sorted,
                       std::vector<double>(sample.begin(), sample.end()));
}

double psi(std::span<const double> ref, std::span<const double> sample,
           std::size_t n_bins, bool* degenerate) {
  if (ref.empty() || sample.empty()) throw ArgumentError("psi: empty input");
  if (n_bins < 2) throw ArgumentError("psi: need at least 2 bins");
  std::vector<double> sorted(ref.begin(), ref.end());
  std::sort(sorted.begin(), sorted.end());
  const auto edges = psi_edges(sorted, n_bins);
  if (degenerate != nullptr) *degenerate = edges.size() + 1 < n_bins;
  return psi_from_props(bin_proportions(ref, edges),
                        bin_proportions(sample, edges));
}

DriftReference::DriftReference(const Matrix& train_X, std::size_t n_bins) {
  if (train_X.empty()) throw ArgumentError("DriftReference: empty reference");
  if (n_bins < 2) throw ArgumentError("psi: need at least 2 bins");
  for (std::size_t j = 0; j < train_X.cols(); ++j) {
    std::vector<double> col = train_X.column(j);
    std::sort(col.begin(), col.end());
    edges_.push_back(psi_edges(col, n_bins));
    ref_props_.push_back(bin_proportions(col, edges_.back()));
    degenerate_.push_back(edges_.back().size() + 1 < n_bins);
    sorted_.push_back(std::move(col));
  }
}

double DriftReference::ks(std::size_t feature,
                          std::span<const double> sample) const {
  return ks_sorted_ref(sorted_.at(feature),
                       std::vector<double>(sample.begin(), sample.end()));
}

double DriftReference::psi(std::size_t feature,
                           std::span<const double> sample) const {
  if (sample.empty()) throw ArgumentError("psi: empty input");
  return psi_from_props(ref_props_.at(feature),
                        bin_proportions(sample, edges_.at(feature)));
}

double DriftReference::monitor_value(const Matrix& window_X,
                                     MonitorMethod method) const {
  if (window_X.cols() != dims()) {
    throw ArgumentError("drift monitor: dimension mismatch");
  }
  if (method == MonitorMethod::kDoubt) {
    throw ArgumentError("drift monitor: method must be ks or psi");
  }
  double s = 0.0;
  for (std::size_t j = 0; j < dims(); ++j) {
    const std::vector<double> col = window_X.column(j);
    s += method == MonitorMethod::kKs ? ks(j, col) : psi(j, col);
  }
  return s / static_cast<double>(dims());
}

double uncertainty_monitor_value(const BootstrapEnsemble& ensemble,
                                 const Matrix& window_X, double alpha,
                                 std::uint64_t rng_seed) {
  if (window_X.empty()) throw ArgumentError("uncertainty monitor: empty window");
  const auto ivs = predict_intervals(ensemble, window_X, alpha, rng_seed,
                                     IntervalMethod::kDoubt,
                                     DrawSharing::kShared);
  double s = 0.0;
  for (const auto& iv : ivs) s += iv.width();
  return s / static_cast<double>(ivs.size());
}

double drift_monitor_value(const Matrix& train_X, const Matrix& window_X,
                           MonitorMethod method) {
  if (train_X.cols() != window_X.cols()) {
    throw ArgumentError("drift monitor: dimension mismatch");
  }
  return DriftReference(train_X).monitor_value(window_X, method);
}

double window_mse(const FittedModel& full_model, const Matrix& window_X,
                  std::span<const double> window_y) {
  if (window_X.rows() != window_y.size()) {
    throw ArgumentError("window_mse: length mismatch");
  }
  if (window_y.empty()) throw ArgumentError("window_mse: empty window");
  return mean_squared_error(window_y, full_model.predict(window_X));
}

std::vector<double> standardize(std::span<const double> v, bool* constant) {
  if (v.empty()) throw ArgumentError("standardize: empty input");
  const double mu = mean(v);
  const double sd = population_std(v);
  std::vector<double> z(v.size(), 0.0);
  const bool flat = !(sd > 0.0);
  if (constant != nullptr) *constant = flat;
  if (flat) return z;
  for (std::size_t i = 0; i < v.size(); ++i) z[i] = (v[i] - mu) / sd;
  return z;
}

std::string_view to_string(Section section) {
  switch (section) {
    case Section::kLower:
      return "lower";
    case Section::kTrain:
      return "train";
    case Section::kUpper:
      return "upper";
    case Section::kMixed:
      return "mixed";
  }
  return "mixed";
}

std::vector<Section> tag_windows(const WindowPlan& plan, std::size_t n_lower,
                                 std::size_t n_train, std::size_t n_upper) {
  const std::size_t train_end = n_lower + n_train;
  std::vector<Section> tags;
  tags.reserve(plan.window_ranges.size());
  for (const auto& r : plan.window_ranges) {
    if (r.end > train_end + n_upper) {
      throw ArgumentError("tag_windows: window beyond the sorted rows");
    }
    if (r.end <= n_lower) {
      tags.push_back(Section::kLower);
    } else if (r.start >= n_lower && r.end <= train_end) {
      tags.push_back(Section::kTrain);
    } else if (r.start >= train_end) {
      tags.push_back(Section::kUpper);
    } else {
      tags.push_back(Section::kMixed);
    }
  }
  return tags;
}

void MonitorSeries::standardize_all() {
  z_monitor = standardize(raw_monitor, &constant_monitor);
  z_mse = standardize(raw_mse, &constant_mse);
}

double deterioration_score(const MonitorSeries& series) {
  if (series.z_monitor.size() != series.sections.size() ||
      series.z_mse.size() != series.sections.size()) {
    throw ArgumentError("deterioration_score: series not standardized");
  }
  double s = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < series.sections.size(); ++k) {
    if (series.sections[k] != Section::kLower &&
        series.sections[k] != Section::kUpper) {
      continue;
    }
    s += std::abs(series.z_monitor[k] - series.z_mse[k]);
    ++count;
  }
  if (count == 0) {
    throw ArgumentError(
        "deterioration_score: no window lies outside the training section");
  }
  return s / static_cast<double>(count);
}

const MonitorScore* ScoreReport::find(std::string_view model,
                                      std::string_view method) const {
  for (const auto& a : aggregates) {
    if (a.model == model && a.method == method) return &a;
  }
  return nullptr;
}

namespace {

struct GroupTask {
  const DatasetTable* ds;
  std::size_t feature;
  const EstimatorSpec* spec;
};

struct GroupResult {
  std::vector<MonitorSeries> series;
  std::vector<MonitorCell> cells;
  std::string skipped;
};

GroupResult run_group(const GroupTask& task, const MonitorOptions& opt) {
  const DatasetTable& ds = *task.ds;
  const std::string& feature = ds.feature_names[task.feature];
  const std::string model(to_string(task.spec->kind));
  GroupResult out;
  const std::string where = ds.name + "/" + feature + "/" + model + ": ";

  const SplitTriple split = sorted_three_way_split(ds, feature);
  if (split.constant_feature) {
    out.skipped = where + "constant feature";
    return out;
  }
  const std::size_t n = ds.rows();
  const std::size_t n_lower = split.lower_idx.size();
  const std::size_t n_train = split.train_idx.size();
  const std::size_t n_upper = split.upper_idx.size();
  if (opt.window > n || n_train < 2) {
    out.skipped = where + "too few rows for the window";
    return out;
  }
  const WindowPlan plan = rolling_windows(n, opt.window, opt.stride);
  const std::vector<Section> tags =
      tag_windows(plan, n_lower, n_train, n_upper);
  if (std::none_of(tags.begin(), tags.end(), [](Section s) {
        return s == Section::kLower || s == Section::kUpper;
      })) {
    out.skipped = where + "no window outside the training section";
    return out;
  }

  const std::vector<std::size_t> order = split.sorted_order();
  const Matrix Xs = ds.features.select_rows(order);
  const std::vector<double> ys = select<double>(ds.target, order);
  std::vector<std::size_t> train_pos(n_train);
  std::iota(train_pos.begin(), train_pos.end(), n_lower);
  const Matrix X_train = Xs.select_rows(train_pos);
  const std::vector<double> y_train = select<double>(ys, train_pos);
  if (task.spec->kind == ModelKind::kPoisson &&
      std::any_of(y_train.begin(), y_train.end(),
                  [](double v) { return v < 0.0; })) {
    out.skipped = where + "negative targets for poisson";
    return out;
  }

  const std::uint64_t group_seed =
      derive_seed(opt.seed, ds.name, feature, model);
  const bool want_doubt =
      std::find(opt.methods.begin(), opt.methods.end(),
                MonitorMethod::kDoubt) != opt.methods.end();

  std::vector<double> preds;
  std::vector<double> widths;
  if (want_doubt) {
    EnsembleOptions eo;
    eo.jobs = 1;
    eo.query = &Xs;
    eo.keep_replicas = false;
    const BootstrapEnsemble ens = fit_ensemble(
        *task.spec, X_train, y_train, opt.bootstraps, group_seed, eo);
    preds = ens.query_point_preds;
    const auto samples = query_interval_samples(
        ens, derive_seed(group_seed, "doubt"), IntervalMethod::kDoubt,
        DrawSharing::kShared);
    widths.reserve(n);
    for (const auto& s : samples) widths.push_back(s.at(opt.alpha).width());
  } else {
    std::vector<std::size_t> all(n_train);
    std::iota(all.begin(), all.end(), std::size_t{0});
    preds = fit_rows(*task.spec, X_train, y_train, all,
                     derive_seed(group_seed, "full"))
                .predict(Xs);
  }

  std::vector<double> mse;
  mse.reserve(plan.window_ranges.size());
  for (const auto& r : plan.window_ranges) {
    double s = 0.0;
    for (std::size_t i = r.start; i < r.end; ++i) {
      s += (ys[i] - preds[i]) * (ys[i] - preds[i]);
    }
    mse.push_back(s / static_cast<double>(r.end - r.start));
  }

  std::optional<DriftReference> ref;
  for (MonitorMethod method : opt.methods) {
    MonitorSeries series;
    series.dataset = ds.name;
    series.feature = feature;
    series.model = model;
    series.method = std::string(to_string(method));
    series.window_ranges = plan.window_ranges;
    series.sections = tags;
    series.raw_mse = mse;
    for (const auto& r : plan.window_ranges) {
      double value = 0.0;
      if (method == MonitorMethod::kDoubt) {
        for (std::size_t i = r.start; i < r.end; ++i) value += widths[i];
        value /= static_cast<double>(r.end - r.start);
      } else {
        if (!ref) ref.emplace(X_train, opt.psi_bins);
        std::vector<std::size_t> rows(r.end - r.start);
        std::iota(rows.begin(), rows.end(), r.start);
        value = ref->monitor_value(Xs.select_rows(rows), method);
      }
      series.raw_monitor.push_back(value);
    }
    series.standardize_all();
    MonitorCell cell;
    cell.dataset = ds.name;
    cell.feature = feature;
    cell.model = model;
    cell.method = series.method;
    cell.score = deterioration_score(series);
    cell.ood_windows = static_cast<std::size_t>(
        std::count_if(tags.begin(), tags.end(), [](Section s) {
          return s == Section::kLower || s == Section::kUpper;
        }));
    out.cells.push_back(cell);
    out.series.push_back(std::move(series));
  }
  return out;
}

}  // namespace

ScoreReport run_monitor_benchmark(const std::vector<DatasetTable>& datasets,
                                  const std::vector<EstimatorSpec>& specs,
                                  const MonitorOptions& options,
                                  std::vector<MonitorSeries>* series) {
  if (options.methods.empty()) throw ArgumentError("monitor: no methods");
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) {
    throw ArgumentError("alpha must lie in (0, 1)");
  }
  if (options.window == 0 || options.stride == 0) {
    throw ArgumentError("monitor: window and stride must be positive");
  }
  std::vector<GroupTask> tasks;
  for (const auto& ds : datasets) {
    for (std::size_t j = 0; j < ds.dims(); ++j) {
      const std::string& name = ds.feature_names[j];
      if (ds.categorical_levels.contains(name)) continue;
      if (!options.features.empty() &&
          std::find(options.features.begin(), options.features.end(), name) ==
              options.features.end()) {
        continue;
      }
      for (const auto& spec : specs) tasks.push_back({&ds, j, &spec});
    }
  }
  std::vector<GroupResult> results(tasks.size());
  parallel_for(tasks.size(), options.jobs, [&](std::size_t k) {
    if (options.log) {
      options.log("monitor: " + tasks[k].ds->name + " / " +
                  tasks[k].ds->feature_names[tasks[k].feature] + " / " +
                  std::string(to_string(tasks[k].spec->kind)));
    }
    results[k] = run_group(tasks[k], options);
  });

  std::vector<MonitorCell> cells;
  std::vector<std::string> skipped;
  for (auto& r : results) {
    for (auto& c : r.cells) cells.push_back(std::move(c));
    if (!r.skipped.empty()) {
      if (options.log) options.log("skipped " + r.skipped);
      skipped.push_back(std::move(r.skipped));
    }
    if (series != nullptr) {
      for (auto& s : r.series) series->push_back(std::move(s));
    }
  }
  return aggregate_scores(std::move(cells), std::move(skipped));
}

ScoreReport aggregate_scores(std::vector<MonitorCell> cells,
                             std::vector<std::string> skipped) {
  ScoreReport report;
  using Key = std::tuple<std::string, std::string, std::string>;
  std::vector<Key> order;
  std::map<Key, std::vector<double>> by_dataset;
  for (const auto& c : cells) {
    Key key{c.dataset, c.model, c.method};
    auto [it, inserted] = by_dataset.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(c.score);
  }
  std::vector<std::pair<std::string, std::string>> agg_order;
  std::map<std::pair<std::string, std::string>, std::vector<double>> by_model;
  for (const auto& key : order) {
    const auto& v = by_dataset[key];
    const auto& [dataset, model, method] = key;
    report.per_dataset.push_back(
        {dataset, model, method, mean(v), sample_std(v), v.size()});
    auto [it, inserted] = by_model.try_emplace({model, method});
    if (inserted) agg_order.emplace_back(model, method);
    it->second.push_back(report.per_dataset.back().mean);
  }
  for (const auto& key : agg_order) {
    const auto& v = by_model[key];
    report.aggregates.push_back(
        {"", key.first, key.second, mean(v), sample_std(v), v.size()});
  }
  report.cells = std::move(cells);
  report.skipped = std::move(skipped);
  return report;
}

std::string series_csv(const MonitorSeries& s) {
  std::ostringstream out;
  out << "window_start,window_end,section,raw_monitor,raw_mse,z_monitor,"
         "z_mse\n";
  for (std::size_t k = 0; k < s.window_ranges.size(); ++k) {
    out << s.window_ranges[k].start << ',' << s.window_ranges[k].end << ','
        << to_string(s.sections[k]) << ',' << format_double(s.raw_monitor[k])
        << ',' << format_double(s.raw_mse[k]) << ','
        << format_double(s.z_monitor[k]) << ',' << format_double(s.z_mse[k])
        << '\n';
  }
  return out.str();
}

std::string series_filename(const MonitorSeries& s) {
  auto clean = [](const std::string& v) {
    std::string r = v;
    for (char& c : r) {
      const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                      (c >= '0' && c <= '9') || c == '_' || c == '-' ||
                      c == '.';
      if (!ok) c = '_';
    }
    return r;
  };
  return clean(s.dataset) + "__" + clean(s.feature) + "__" + clean(s.model) +
         "__" + clean(s.method) + ".csv";
}

std::string scores_csv(const ScoreReport& report) {
  std::ostringstream out;
  out << "dataset,model,method,score,score_std,n_features\n";
  for (const auto& s : report.per_dataset) {
    out << s.dataset << ',' << s.model << ',' << s.method << ','
        << format_double(s.mean) << ',' << format_double(s.std) << ','
        << s.count << '\n';
  }
  return out.str();
}

std::string cells_csv(const ScoreReport& report) {
  std::ostringstream out;
  out << "dataset,feature,model,method,score,ood_windows\n";
  for (const auto& c : report.cells) {
    out << c.dataset << ',' << c.feature << ',' << c.model << ',' << c.method
        << ',' << format_double(c.score) << ',' << c.ood_windows << '\n';
  }
  return out.str();
}

std::string scores_json(const ScoreReport& report) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["metric"] = "mean |z_monitor - z_mse| over out-of-distribution windows";
  ordered_json table = ordered_json::object();
  for (const auto& a : report.aggregates) {
    table[a.model][a.method] = {
        {"mean", a.mean}, {"std", a.std}, {"datasets", a.count}};
  }
  doc["table"] = table;
  ordered_json per = ordered_json::object();
  for (const auto& s : report.per_dataset) {
    per[s.dataset][s.model][s.method] = {{"mean", s.mean}, {"std", s.std}};
  }
  doc["per_dataset"] = per;
  doc["skipped"] = report.skipped;
  return doc.dump(2) + "\n";
}

}  // namespace bootmon
