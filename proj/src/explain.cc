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

#include "bootmon/explain.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "bootmon/error.h"
#include "bootmon/monitor.h"
#include "bootmon/random.h"
#include "bootmon/stats.h"

namespace bootmon {

std::vector<double> uncertainty_targets(const BootstrapEnsemble& ensemble,
                                        const Matrix& X_val, double alpha,
                                        std::uint64_t rng_seed) {
  const auto ivs = predict_intervals(ensemble, X_val, alpha, rng_seed,
                                     IntervalMethod::kDoubt,
                                     DrawSharing::kShared);
  std::vector<double> w(ivs.size());
  for (std::size_t i = 0; i < ivs.size(); ++i) w[i] = ivs[i].width();
  return w;
}

SurrogateExplainer fit_surrogate(const Matrix& X,
                                 std::span<const double> widths,
                                 const EstimatorSpec& spec,
                                 std::uint64_t seed) {
  if (!is_tree_based(spec.kind)) {
    throw ArgumentError("fit_surrogate: surrogate must be tree-based, got " +
                        std::string(to_string(spec.kind)));
  }
  if (X.rows() != widths.size()) {
    throw ArgumentError("fit_surrogate: X/widths length mismatch");
  }
  for (double w : widths) {
    if (!std::isfinite(w)) throw ArgumentError("fit_surrogate: non-finite width");
  }
  const RowSplit split =
      random_split_indices(X.rows(), 0.2, derive_seed(seed, "holdout"));
  FittedModel model = fit_rows(spec, X, widths, split.train_idx,
                               derive_seed(seed, "fit"));
  const Matrix X_hold = X.select_rows(split.test_idx);
  const std::vector<double> truth = select<double>(widths, split.test_idx);
  const double lo = *std::min_element(widths.begin(), widths.end());
  const double hi = *std::max_element(widths.begin(), widths.end());
  const double r2 = r_squared(truth, model.predict(X_hold));
  return SurrogateExplainer{std::move(model),
                            std::to_string(split.train_idx.size()) +
                                " rows of interval widths",
                            r2, lo == hi};
}

namespace {

struct PathElement {
  int feature;
  double zero_fraction;
  double one_fraction;
  double weight;
};

void extend_path(PathElement* path, std::size_t depth, double zero_fraction,
                 double one_fraction, int feature) {
  path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
  const auto d1 = static_cast<double>(depth + 1);
  for (std::size_t k = depth; k-- > 0;) {
    path[k + 1].weight +=
        one_fraction * path[k].weight * static_cast<double>(k + 1) / d1;
    path[k].weight = zero_fraction * path[k].weight *
                     static_cast<double>(depth - k) / d1;
  }
}

void unwind_path(PathElement* path, std::size_t depth, std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  const auto d1 = static_cast<double>(depth + 1);
  double next = path[depth].weight;
  for (std::size_t k = depth; k-- > 0;) {
    if (one != 0.0) {
      const double tmp = path[k].weight;
      path[k].weight = next * d1 / (static_cast<double>(k + 1) * one);
      next = tmp - path[k].weight * zero * static_cast<double>(depth - k) / d1;
    } else {
      path[k].weight =
          path[k].weight * d1 / (zero * static_cast<double>(depth - k));
    }
  }
  for (std::size_t k = index; k < depth; ++k) {
    path[k].feature = path[k + 1].feature;
    path[k].zero_fraction = path[k + 1].zero_fraction;
    path[k].one_fraction = path[k + 1].one_fraction;
  }
}

double unwound_sum(const PathElement* path, std::size_t depth,
                   std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  const auto d1 = static_cast<double>(depth + 1);
  double next = path[depth].weight;
  double total = 0.0;
  for (std::size_t k = depth; k-- > 0;) {
    if (one != 0.0) {
      const double tmp = next * d1 / (static_cast<double>(k + 1) * one);
      total += tmp;
      next = path[k].weight - tmp * zero * static_cast<double>(depth - k) / d1;
    } else {
      total += path[k].weight / zero / (static_cast<double>(depth - k) / d1);
    }
  }
  return total;
}

class TreeShapRun {
 public:
  TreeShapRun(const Tree& tree, std::span<const double> x,
              std::span<double> phi)
      : tree_(tree), x_(x), phi_(phi) {
    const std::size_t depth = tree.depth();
    buffer_.resize((depth + 2) * (depth + 3) / 2);
  }

  void run() { recurse(0, buffer_.data(), 0, 1.0, 1.0, -1); }

 private:
  void recurse(std::size_t node, PathElement* parent_path, std::size_t depth,
               double zero_fraction, double one_fraction, int feature) {
    PathElement* path = parent_path + depth;
    if (depth > 0) std::copy(parent_path, parent_path + depth, path);
    extend_path(path, depth, zero_fraction, one_fraction, feature);
    const TreeNode& n = tree_.node(node);
    if (n.is_leaf()) {
      for (std::size_t k = 1; k <= depth; ++k) {
        const double w = unwound_sum(path, depth, k);
        phi_[static_cast<std::size_t>(path[k].feature)] +=
            w * (path[k].one_fraction - path[k].zero_fraction) * n.value;
      }
      return;
    }
    if (!(n.cover > 0.0)) {
      throw ArgumentError("tree_shap: internal node with zero cover");
    }
    const bool go_left = x_[static_cast<std::size_t>(n.feature)] <= n.threshold;
    const std::size_t hot = static_cast<std::size_t>(go_left ? n.left : n.right);
    const std::size_t cold = static_cast<std::size_t>(go_left ? n.right : n.left);
    const double hot_zero = tree_.node(hot).cover / n.cover;
    const double cold_zero = tree_.node(cold).cover / n.cover;
    double incoming_zero = 1.0;
    double incoming_one = 1.0;
    std::size_t k = 0;
    for (; k <= depth; ++k) {
      if (path[k].feature == n.feature) break;
    }
    if (k <= depth) {
      incoming_zero = path[k].zero_fraction;
      incoming_one = path[k].one_fraction;
      unwind_path(path, depth, k);
      --depth;
    }
    // `path` occupies depth + 1 slots; children start right after it.
    recurse(hot, path, depth + 1, hot_zero * incoming_zero, incoming_one,
            n.feature);
    recurse(cold, path, depth + 1, cold_zero * incoming_zero, 0.0, n.feature);
  }

  const Tree& tree_;
  std::span<const double> x_;
  std::span<double> phi_;
  std::vector<PathElement> buffer_;
};

double expected_from(const Tree& tree, std::size_t node) {
  const TreeNode& n = tree.node(node);
  if (n.is_leaf()) return n.value;
  if (!(n.cover > 0.0)) {
    throw ArgumentError("tree_shap: internal node with zero cover");
  }
  const TreeNode& l = tree.node(static_cast<std::size_t>(n.left));
  const TreeNode& r = tree.node(static_cast<std::size_t>(n.right));
  return (l.cover * expected_from(tree, static_cast<std::size_t>(n.left)) +
          r.cover * expected_from(tree, static_cast<std::size_t>(n.right))) /
         n.cover;
}

void check_tree(const Tree& tree, std::size_t d) {
  if (tree.size() == 0) throw ArgumentError("tree_shap: empty tree");
  for (const auto& n : tree.nodes()) {
    if (!n.is_leaf() && static_cast<std::size_t>(n.feature) >= d) {
      throw ArgumentError("tree_shap: split feature beyond input dimension");
    }
  }
}

}  // namespace

double expected_value(const Tree& tree) {
  if (tree.size() == 0) throw ArgumentError("tree_shap: empty tree");
  return expected_from(tree, 0);
}

ShapValues tree_shap(const Tree& tree, std::span<const double> x) {
  check_tree(tree, x.size());
  ShapValues out;
  out.phi.assign(x.size(), 0.0);
  out.base = expected_value(tree);
  TreeShapRun(tree, x, out.phi).run();
  return out;
}

ShapValues tree_shap(const FittedModel& model, std::span<const double> x) {
  if (x.size() != model.train_dim()) {
    throw ArgumentError("tree_shap: dimension mismatch");
  }
  const TreeDecomposition dec = trees_of(model);
  ShapValues out;
  out.base = dec.offset;
  out.phi.assign(x.size(), 0.0);
  for (const auto& wt : dec.trees) {
    const ShapValues t = tree_shap(*wt.tree, x);
    out.base += wt.weight * t.base;
    for (std::size_t j = 0; j < x.size(); ++j) out.phi[j] += wt.weight * t.phi[j];
  }
  return out;
}

ShapValues tree_shap(const SurrogateExplainer& explainer,
                     std::span<const double> x) {
  return tree_shap(explainer.surrogate, x);
}

namespace {

double subset_value(const Tree& tree, std::size_t node,
                    std::span<const double> x, std::uint32_t subset) {
  const TreeNode& n = tree.node(node);
  if (n.is_leaf()) return n.value;
  if (!(n.cover > 0.0)) {
    throw ArgumentError("exact_shap_oracle: internal node with zero cover");
  }
  const auto f = static_cast<std::size_t>(n.feature);
  const auto left = static_cast<std::size_t>(n.left);
  const auto right = static_cast<std::size_t>(n.right);
  if (subset & (1u << f)) {
    return subset_value(tree, x[f] <= n.threshold ? left : right, x, subset);
  }
  return (tree.node(left).cover * subset_value(tree, left, x, subset) +
          tree.node(right).cover * subset_value(tree, right, x, subset)) /
         n.cover;
}

}  // namespace

ShapValues exact_shap_oracle(const Tree& tree, std::span<const double> x) {
  const std::size_t d = x.size();
  if (d > 15) throw ArgumentError("exact_shap_oracle: at most 15 features");
  check_tree(tree, d);
  const std::uint32_t full = 1u << d;
  std::vector<double> v(full);
  for (std::uint32_t s = 0; s < full; ++s) v[s] = subset_value(tree, 0, x, s);
  // |S|! (d - |S| - 1)! / d!
  std::vector<double> coef(d);
  for (std::size_t k = 0; k < d; ++k) {
    double c = 1.0;
    for (std::size_t i = 1; i <= k; ++i) c *= static_cast<double>(i);
    for (std::size_t i = 1; i + k + 1 <= d; ++i) c *= static_cast<double>(i);
    for (std::size_t i = 1; i <= d; ++i) c /= static_cast<double>(i);
    coef[k] = c;
  }
  ShapValues out;
  out.base = v[0];
  out.phi.assign(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    const std::uint32_t bit = 1u << j;
    for (std::uint32_t s = 0; s < full; ++s) {
      if (s & bit) continue;
      out.phi[j] += coef[static_cast<std::size_t>(std::popcount(s))] *
                    (v[s | bit] - v[s]);
    }
  }
  return out;
}

ShapReport explain_rows(const SurrogateExplainer& explainer, const Matrix& X,
                        std::vector<std::string> feature_names,
                        std::size_t jobs) {
  if (feature_names.size() != X.cols()) {
    throw ArgumentError("explain_rows: one name per feature required");
  }
  ShapReport report;
  report.feature_names = std::move(feature_names);
  report.contributions = Matrix(X.rows(), X.cols());
  report.predictions = explainer.surrogate.predict(X);
  std::vector<double> bases(X.rows(), 0.0);
  jobs = std::max<std::size_t>(1, std::min(jobs, X.rows()));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  auto worker = [&](std::size_t id) {
    try {
      for (std::size_t i = next++; i < X.rows(); i = next++) {
        const ShapValues s = tree_shap(explainer, X.row(i));
        bases[i] = s.base;
        std::copy(s.phi.begin(), s.phi.end(), report.contributions.row(i).begin());
      }
    } catch (...) {
      errors[id] = std::current_exception();
    }
  };
  if (jobs == 1) {
    worker(0);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < jobs; ++t) threads.emplace_back(worker, t);
    for (auto& t : threads) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  if (!bases.empty()) report.base_value = bases[0];
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const auto row = report.contributions.row(i);
    const double total = std::accumulate(row.begin(), row.end(), bases[i]);
    const double p = report.predictions[i];
    report.max_efficiency_error =
        std::max(report.max_efficiency_error,
                 std::abs(total - p) / std::max(1.0, std::abs(p)));
  }
  return report;
}

std::vector<double> global_importance(const ShapReport& report) {
  const Matrix& c = report.contributions;
  if (c.rows() == 0) throw ArgumentError("global_importance: empty report");
  std::vector<double> imp(c.cols(), 0.0);
  for (std::size_t i = 0; i < c.rows(); ++i) {
    for (std::size_t j = 0; j < c.cols(); ++j) imp[j] += std::abs(c(i, j));
  }
  for (auto& v : imp) v /= static_cast<double>(c.rows());
  return imp;
}

std::vector<std::size_t> importance_ranking(
    std::span<const double> importance) {
  std::vector<std::size_t> idx(importance.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return importance[a] > importance[b];
  });
  return idx;
}

std::vector<std::pair<std::string, double>> local_explanation(
    const ShapReport& report, std::size_t row) {
  if (row >= report.contributions.rows()) {
    throw ArgumentError("local_explanation: row out of range");
  }
  const auto c = report.contributions.row(row);
  std::vector<double> mag(c.size());
  for (std::size_t j = 0; j < c.size(); ++j) mag[j] = std::abs(c[j]);
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t j : importance_ranking(mag)) {
    out.emplace_back(report.feature_names[j], c[j]);
  }
  return out;
}

AttributionReport run_drift_attribution(const DatasetTable& input,
                                        const AttributionOptions& opt) {
  auto log = [&](const std::string& m) {
    if (opt.log) opt.log(m);
  };
  if (std::find(input.feature_names.begin(), input.feature_names.end(),
                opt.noise_feature) != input.feature_names.end()) {
    throw ArgumentError("drift attribution: dataset already has a feature '" +
                        opt.noise_feature + "'");
  }
  for (const auto& f : opt.substantive) input.feature_index(f);

  DatasetTable ds = input;
  {
    Rng rng(derive_seed(opt.seed, "noise"));
    std::vector<double> noise(ds.rows());
    for (auto& v : noise) v = standard_normal(rng);
    ds.features = ds.features.with_column(noise);
    ds.feature_names.push_back(opt.noise_feature);
  }
  auto [train, val] =
      random_split(ds, opt.validation_fraction, derive_seed(opt.seed, "split"));

  log("drift: fitting " + std::to_string(opt.bootstraps) + " replicas of " +
      std::string(to_string(opt.model.kind)));
  EnsembleOptions eo;
  eo.jobs = opt.jobs;
  const BootstrapEnsemble ens =
      fit_ensemble(opt.model, train.features, train.target, opt.bootstraps,
                   derive_seed(opt.seed, "ensemble"), eo);

  std::vector<std::string> shifted_names = opt.substantive;
  shifted_names.push_back(opt.noise_feature);
  DatasetTable shifted = val;
  for (const auto& f : shifted_names) shifted = shift_feature(shifted, f, opt.k_std);

  const std::uint64_t width_seed = derive_seed(opt.seed, "widths");
  const std::vector<double> widths_plain =
      uncertainty_targets(ens, val.features, opt.alpha, width_seed);
  const std::vector<double> widths =
      uncertainty_targets(ens, shifted.features, opt.alpha, width_seed);

  log("drift: fitting the surrogate");
  const SurrogateExplainer explainer = fit_surrogate(
      shifted.features, widths, opt.surrogate, derive_seed(opt.seed, "surrogate"));
  ShapReport shap =
      explain_rows(explainer, shifted.features, shifted.feature_names, opt.jobs);
  const std::vector<double> importance = global_importance(shap);

  AttributionReport rep;
  rep.dataset = input.name;
  rep.shifted_features = shifted_names;
  rep.k_std = opt.k_std;
  rep.alpha = opt.alpha;
  rep.train_rows = train.rows();
  rep.validation_rows = val.rows();
  rep.model_r2 =
      r_squared(val.target, ens.full_model->predict(val.features));
  rep.surrogate_r2 = explainer.fit_quality;
  rep.surrogate_constant_targets = explainer.constant_targets;
  rep.mean_width_unshifted = mean(widths_plain);
  rep.mean_width_shifted = mean(widths);
  rep.max_efficiency_error = shap.max_efficiency_error;

  const DriftReference ref(train.features);
  for (std::size_t j = 0; j < ds.dims(); ++j) {
    FeatureAttribution fa;
    fa.feature = ds.feature_names[j];
    fa.shifted = std::find(shifted_names.begin(), shifted_names.end(),
                           fa.feature) != shifted_names.end();
    fa.shap_importance = importance[j];
    const auto col = shifted.features.column(j);
    const auto base_col = val.features.column(j);
    fa.ks = ref.ks(j, col);
    fa.psi = ref.psi(j, col);
    fa.ks_baseline = ref.ks(j, base_col);
    fa.psi_baseline = ref.psi(j, base_col);
    rep.features.push_back(fa);
  }
  rep.local_row = static_cast<std::size_t>(
      std::max_element(shap.predictions.begin(), shap.predictions.end()) -
      shap.predictions.begin());
  rep.local_prediction = shap.predictions[rep.local_row];
  const auto values = shifted.features.row(rep.local_row);
  rep.local_values.assign(values.begin(), values.end());
  rep.local = local_explanation(shap, rep.local_row);
  rep.shap = std::move(shap);
  return rep;
}

std::string attribution_json(const AttributionReport& r) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["dataset"] = r.dataset;
  doc["shifted_features"] = r.shifted_features;
  doc["k_std"] = r.k_std;
  doc["alpha"] = r.alpha;
  doc["train_rows"] = r.train_rows;
  doc["validation_rows"] = r.validation_rows;
  doc["model_r2"] = r.model_r2;
  doc["surrogate_r2"] = r.surrogate_r2;
  doc["surrogate_constant_targets"] = r.surrogate_constant_targets;
  doc["mean_width_unshifted"] = r.mean_width_unshifted;
  doc["mean_width_shifted"] = r.mean_width_shifted;
  doc["base_value"] = r.shap.base_value;
  doc["max_efficiency_error"] = r.max_efficiency_error;
  doc["efficiency_ok"] = r.max_efficiency_error <= 1e-6;
  ordered_json per = ordered_json::object();
  for (const auto& f : r.features) {
    per[f.feature] = {{"shifted", f.shifted},
                      {"shap_importance", f.shap_importance},
                      {"ks", f.ks},
                      {"psi", f.psi},
                      {"ks_baseline", f.ks_baseline},
                      {"psi_baseline", f.psi_baseline}};
  }
  doc["per_feature"] = per;
  return doc.dump(2) + "\n";
}

std::string local_explanation_json(const AttributionReport& r) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["row"] = r.local_row;
  doc["base_value"] = r.shap.base_value;
  doc["prediction"] = r.local_prediction;
  ordered_json items = ordered_json::array();
  for (const auto& [feature, c] : r.local) {
    const auto j = static_cast<std::size_t>(
        std::find(r.shap.feature_names.begin(), r.shap.feature_names.end(),
                  feature) -
        r.shap.feature_names.begin());
    items.push_back({{"feature", feature},
                     {"value", r.local_values.at(j)},
                     {"contribution", c}});
  }
  doc["contributions"] = items;
  return doc.dump(2) + "\n";
}

std::string figure2_csv(const AttributionReport& r) {
  std::ostringstream out;
  out << "feature,shap_importance,ks,psi,shifted\n";
  for (const auto& f : r.features) {
    out << f.feature << ',' << format_double(f.shap_importance) << ','
        << format_double(f.ks) << ',' << format_double(f.psi) << ','
        << (f.shifted ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string figure3_csv(const AttributionReport& r) {
  std::ostringstream out;
  out << "rank,feature,value,contribution\n";
  for (std::size_t k = 0; k < r.local.size(); ++k) {
    const auto& [feature, c] = r.local[k];
    const auto j = static_cast<std::size_t>(
        std::find(r.shap.feature_names.begin(), r.shap.feature_names.end(),
                  feature) -
        r.shap.feature_names.begin());
    out << k + 1 << ',' << feature << ',' << format_double(r.local_values.at(j))
        << ',' << format_double(c) << '\n';
  }
  return out.str();
}

}  // namespace bootmon
