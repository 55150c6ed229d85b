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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only when
// every criterion passes. Benchmarks use the UCI files in BOOTMON_DATA_DIR (or
// --data-dir) when present, otherwise the synthetic stand-ins, and say which.
//
//   acceptance [--data-dir DIR] [--jobs N] [--only 1,4,...] [--require-real-data]
//
// With --require-real-data the run exits 77 (skipped) unless all eight UCI
// datasets are available as real files.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bootmon/cli.h"
#include "bootmon/data.h"
#include "bootmon/error.h"
#include "bootmon/explain.h"
#include "bootmon/intervals.h"
#include "bootmon/models.h"
#include "bootmon/monitor.h"
#include "bootmon/random.h"
#include "bootmon/stats.h"
#include "bootmon/synthetic.h"

namespace bootmon {
namespace {

constexpr int kSkip = 77;

struct Args {
  std::string data_dir;
  std::size_t jobs = 1;
  std::set<int> only;
  bool require_real = false;
};

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << std::fixed << v;
  return s.str();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

void log(const std::string& m) { std::cerr << "  .. " << m << '\n'; }

// ---------------------------------------------------------------------------
// Benchmark inputs

struct Corpus {
  std::vector<DatasetTable> datasets;
  std::string label;
  bool all_real = false;
};

Corpus load_corpus(const Args& args) {
  const auto& reg = DatasetRegistry::builtin();
  Corpus c;
  std::size_t real = 0;
  RunConfig cfg;
  cfg.data_dir = args.data_dir.empty() ? "/nonexistent" : args.data_dir;
  for (const auto& name : reg.group("uci")) {
    bool loaded = false;
    if (!args.data_dir.empty() && !is_standin(name, cfg.data_dir)) {
      try {
        c.datasets.push_back(resolve_dataset(name, cfg));
        loaded = true;
        ++real;
      } catch (const DataError&) {
      }
    }
    if (!loaded) c.datasets.push_back(make_standin(reg.get(name), 0));
  }
  c.all_real = real == c.datasets.size();
  c.label = c.all_real ? "UCI data"
            : real == 0 ? "synthetic stand-ins"
                        : std::to_string(real) + " UCI files + stand-ins";
  return c;
}

std::vector<EstimatorSpec> specs(std::initializer_list<ModelKind> kinds) {
  std::vector<EstimatorSpec> out;
  for (ModelKind k : kinds) out.push_back(EstimatorSpec::defaults(k));
  return out;
}

const auto kCoverageModels = {ModelKind::kOls, ModelKind::kCart,
                              ModelKind::kGradientBoosting};
const auto kMonitorModels = {ModelKind::kOls, ModelKind::kPoisson,
                             ModelKind::kCart, ModelKind::kRandomForest,
                             ModelKind::kGradientBoosting};

CoverageReport run_coverage(const Corpus& c, std::size_t jobs) {
  CoverageOptions opt;
  opt.bootstraps = 200;
  opt.jobs = jobs;
  opt.log = log;
  return coverage_benchmark(c.datasets, specs(kCoverageModels), opt);
}

ScoreReport run_monitor(const std::vector<DatasetTable>& datasets,
                        std::size_t stride, std::size_t jobs) {
  MonitorOptions opt;
  opt.bootstraps = 50;
  opt.stride = stride;
  opt.jobs = jobs;
  opt.log = log;
  return run_monitor_benchmark(datasets, specs(kMonitorModels), opt);
}

// Lazily computed shared runs.
struct Runs {
  const Args& args;
  std::optional<Corpus> corpus;
  std::optional<CoverageReport> coverage;
  std::optional<ScoreReport> monitor;

  const Corpus& data() {
    if (!corpus) corpus = load_corpus(args);
    return *corpus;
  }
  const CoverageReport& cov() {
    if (!coverage) coverage = run_coverage(data(), args.jobs);
    return *coverage;
  }
  const ScoreReport& mon() {
    if (!monitor) monitor = run_monitor(data().datasets, 10, args.jobs);
    return *monitor;
  }
};

double agg(const CoverageReport& r, std::string_view model,
           std::string_view method) {
  const CoverageAggregate* a = r.find(model, method);
  if (!a) throw std::runtime_error("missing aggregate");
  return a->mean;
}

// ---------------------------------------------------------------------------
// Independent oracles

double no_info_double_loop(const std::vector<double>& y,
                           const std::vector<double>& p) {
  long double s = 0.0L;
  for (double yi : y) {
    for (double pj : p) s += (yi - pj) * (yi - pj);
  }
  return static_cast<double>(s / (static_cast<long double>(y.size()) * p.size()));
}

double ks_by_counting(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> points = a;
  points.insert(points.end(), b.begin(), b.end());
  double best = 0.0;
  for (double x : points) {
    double fa = 0.0, fb = 0.0;
    for (double v : a) fa += v <= x;
    for (double v : b) fb += v <= x;
    best = std::max(best, std::abs(fa / a.size() - fb / b.size()));
  }
  return best;
}

std::int32_t grow_random(std::vector<TreeNode>& nodes, double cover,
                         std::size_t depth, std::size_t d, Rng& rng) {
  const auto id = static_cast<std::int32_t>(nodes.size());
  nodes.push_back({});
  nodes[id].cover = cover;
  nodes[id].value = 10.0 * uniform01(rng) - 5.0;
  if (depth == 0 || cover < 2 || uniform01(rng) < 0.1) return id;
  const double left = 1.0 + static_cast<double>(
                                uniform_index(rng, static_cast<std::size_t>(cover) - 1));
  const auto f = static_cast<std::int32_t>(uniform_index(rng, d));
  const double thr = 2.0 * uniform01(rng) - 1.0;
  const std::int32_t l = grow_random(nodes, left, depth - 1, d, rng);
  const std::int32_t r = grow_random(nodes, cover - left, depth - 1, d, rng);
  nodes[id].feature = f;
  nodes[id].threshold = thr;
  nodes[id].left = l;
  nodes[id].right = r;
  return id;
}

// ---------------------------------------------------------------------------
// Criteria

Verdict c1_cart_ordering(Runs& runs) {
  const auto& r = runs.cov();
  const double doubt = agg(r, "cart", "doubt");
  const double nasa = agg(r, "cart", "nasa");
  return {2.0 * doubt <= nasa,
          "cart mean |coverage - alpha|*100: doubt " + fmt(doubt) + ", nasa " +
              fmt(nasa) + " (need doubt <= nasa / 2; " + runs.data().label +
              ")"};
}

Verdict c2_ols_parity(Runs& runs) {
  const auto& r = runs.cov();
  const double doubt = agg(r, "ols", "doubt");
  const double nasa = agg(r, "ols", "nasa");
  return {std::abs(doubt - nasa) < 3.0,
          "ols doubt " + fmt(doubt) + " vs nasa " + fmt(nasa) +
              " (need |diff| < 3; " + runs.data().label + ")"};
}

Verdict c3_monitor_pattern(Runs& runs) {
  const auto& r = runs.mon();
  bool ok = true;
  std::ostringstream d;
  for (ModelKind k : kMonitorModels) {
    const std::string m(to_string(k));
    const MonitorScore* doubt = r.find(m, "doubt");
    const MonitorScore* psi = r.find(m, "psi");
    if (!doubt || !psi) {
      ok = false;
      d << m << ": missing; ";
      continue;
    }
    const bool good = doubt->mean < psi->mean && psi->mean >= 0.8 &&
                      psi->mean <= 1.2 &&
                      (k != ModelKind::kOls ||
                       (doubt->mean >= 0.5 && doubt->mean <= 1.0));
    ok = ok && good;
    d << m << " doubt " << fmt(doubt->mean, 3) << " psi " << fmt(psi->mean, 3)
      << (good ? "" : " <-") << "; ";
  }
  // Stride-1 spot check on fish toxicity.
  const auto& corpus = runs.data();
  const auto fish = std::find_if(corpus.datasets.begin(), corpus.datasets.end(),
                                 [](const DatasetTable& t) {
                                   return t.name == "fish_toxicity";
                                 });
  const ScoreReport s1 = run_monitor({*fish}, 1, runs.args.jobs);
  double worst = 0.0;
  for (const auto& a : s1.per_dataset) {
    for (const auto& b : r.per_dataset) {
      if (b.dataset == a.dataset && b.model == a.model && b.method == a.method) {
        worst = std::max(worst, std::abs(a.mean - b.mean));
      }
    }
  }
  ok = ok && worst <= 0.05;
  d << "fish stride 1 vs 10 max diff " << fmt(worst, 3) << " (<= 0.05); "
    << corpus.label;
  return {ok, d.str()};
}

Verdict c4_linear_coverage(Runs&) {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const DatasetTable ds = make_linear_synthetic(2000, seed);
    const auto [train, test] = random_split(ds, 0.1, derive_seed(seed, "split"));
    const auto ens = fit_ensemble(EstimatorSpec::defaults(ModelKind::kOls),
                                  train.features, train.target, 200,
                                  derive_seed(seed, "fit"));
    const auto ivs = predict_intervals(ens, test.features, 0.90,
                                       derive_seed(seed, "draws"));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ivs.size(); ++i) {
      hits += ivs[i].lower <= test.target[i] && test.target[i] <= ivs[i].upper;
    }
    total += static_cast<double>(hits) / static_cast<double>(ivs.size());
  }
  const double c = total / 20.0;
  return {std::abs(c - 0.90) <= 0.05,
          "mean coverage over 20 seeds " + fmt(c) + " (need 0.90 +- 0.05)"};
}

Verdict c5_val_weight(Runs&) {
  const double w0 = val_weight_from_rate(0.0);
  const double w1 = val_weight_from_rate(1.0);
  std::ostringstream d;
  d.precision(17);
  d << "rate 0 -> " << w0 << ", rate 1 -> " << w1 << " (exact 0.632 and 1)";
  return {w0 == 0.632 && w1 == 1.0, d.str()};
}

Verdict c6_no_info(Runs&) {
  Rng rng(606);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 2 + uniform_index(rng, 400);
    const double scale = std::pow(10.0, 4.0 * uniform01(rng) - 2.0);
    std::vector<double> y(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = scale * (5.0 + standard_normal(rng));
      p[i] = scale * (4.0 + 2.0 * uniform01(rng));
    }
    const double fast = no_info_error(y, p);
    const double slow = no_info_double_loop(y, p);
    worst = std::max(worst, std::abs(fast - slow) / slow);
  }
  return {worst <= 1e-9, "max relative error " + sci(worst) +
                             " over 100 instances (<= 1e-9)"};
}

Verdict c7_tree_shap(Runs&) {
  Rng rng(707);
  double worst_oracle = 0.0, worst_eff = 0.0;
  bool dummy_exact = true;
  const int trees = 200;
  for (int t = 0; t < trees; ++t) {
    const std::size_t d = 1 + uniform_index(rng, 8);
    std::vector<TreeNode> nodes;
    grow_random(nodes, 20.0 + static_cast<double>(uniform_index(rng, 300)),
                1 + uniform_index(rng, 3), d, rng);
    const Tree tree(std::move(nodes));
    std::vector<bool> used(d, false);
    for (const auto& n : tree.nodes()) {
      if (!n.is_leaf()) used[static_cast<std::size_t>(n.feature)] = true;
    }
    std::vector<double> x(d);
    for (auto& v : x) v = 2.4 * uniform01(rng) - 1.2;
    const ShapValues fast = tree_shap(tree, x);
    const ShapValues exact = exact_shap_oracle(tree, x);
    double sum = fast.base;
    for (std::size_t j = 0; j < d; ++j) {
      worst_oracle = std::max(worst_oracle, std::abs(fast.phi[j] - exact.phi[j]));
      sum += fast.phi[j];
      if (!used[j] && fast.phi[j] != 0.0) dummy_exact = false;
    }
    const double pred = tree.predict(x);
    worst_eff = std::max(worst_eff,
                         std::abs(sum - pred) / std::max(1.0, std::abs(pred)));
  }
  return {worst_oracle <= 1e-8 && worst_eff <= 1e-6 && dummy_exact,
          std::to_string(trees) + " random trees (depth <= 3, d <= 8): max |phi - oracle| " +
              sci(worst_oracle) + ", max efficiency error " +
              sci(worst_eff) + ", dummy " +
              (dummy_exact ? "exact" : "violated")};
}

Verdict c8_drift_attribution(Runs& runs) {
  AttributionOptions opt;
  opt.jobs = runs.args.jobs;
  const AttributionReport r = run_drift_attribution(make_house_synth(), opt);
  bool ok = r.surrogate_r2 > 0.8 && r.max_efficiency_error <= 1e-6;
  std::map<std::string, const FeatureAttribution*> by;
  for (const auto& f : r.features) by[f.feature] = &f;
  std::ostringstream d;
  d << "surrogate R2 " << fmt(r.surrogate_r2, 3) << " (> 0.8); ";
  for (const auto& name : r.shifted_features) {
    const auto* f = by.at(name);
    const bool flagged = f->ks >= 10.0 * f->ks_baseline &&
                         f->psi >= 10.0 * f->psi_baseline;
    ok = ok && flagged;
    d << name << " ks " << fmt(f->ks, 3) << "/" << fmt(f->ks_baseline, 3)
      << " psi " << fmt(f->psi, 2) << "/" << fmt(f->psi_baseline, 3)
      << (flagged ? "" : " <-") << "; ";
  }
  const double noise = by.at(opt.noise_feature)->shap_importance;
  double weakest = INFINITY;
  for (const auto& s : opt.substantive) {
    weakest = std::min(weakest, by.at(s)->shap_importance);
  }
  ok = ok && noise < 0.2 * weakest;
  d << "noise importance / weakest substantive " << fmt(noise / weakest, 3)
    << " (< 0.2)";
  return {ok, d.str()};
}

Verdict c9_ks_psi(Runs&) {
  Rng rng(909);
  std::size_t ks_mismatch = 0;
  double min_psi = INFINITY, max_identical = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> a(1 + uniform_index(rng, 80)), b(1 + uniform_index(rng, 80));
    const bool ties = rep % 2 == 0;
    for (auto& v : a) v = ties ? std::floor(6 * uniform01(rng)) : standard_normal(rng);
    for (auto& v : b) {
      v = ties ? std::floor(6 * uniform01(rng)) : 0.5 + standard_normal(rng);
    }
    if (ks_statistic(a, b) != ks_by_counting(a, b)) ++ks_mismatch;
    min_psi = std::min(min_psi, psi(a, b));
    max_identical = std::max(max_identical, std::abs(psi(a, a)));
  }
  return {ks_mismatch == 0 && max_identical <= 1e-12 && min_psi >= 0.0,
          "ks mismatches " + std::to_string(ks_mismatch) +
              "/100; max psi(identical) " + sci(max_identical) +
              "; min psi " + fmt(min_psi, 6)};
}

Verdict c10_determinism(Runs& runs) {
  const std::size_t other = runs.args.jobs == 1 ? 3 : 1;
  const auto& corpus = runs.data();
  const bool cov_same = coverage_csv(runs.cov()) ==
                        coverage_csv(run_coverage(corpus, other));
  const ScoreReport again = run_monitor(corpus.datasets, 10, other);
  const bool mon_same = scores_csv(runs.mon()) == scores_csv(again) &&
                        cells_csv(runs.mon()) == cells_csv(again);
  return {cov_same && mon_same,
          std::string("coverage.csv ") + (cov_same ? "identical" : "differs") +
              ", scores.csv/cells.csv " + (mon_same ? "identical" : "differ") +
              " for --jobs " + std::to_string(runs.args.jobs) + " vs " +
              std::to_string(other)};
}

struct Criterion {
  int id;
  const char* name;
  Verdict (*run)(Runs&);
};

const Criterion kCriteria[] = {
    {1, "coverage ordering, decision tree", c1_cart_ordering},
    {2, "coverage parity, linear regression", c2_ols_parity},
    {3, "monitoring score pattern", c3_monitor_pattern},
    {4, "coverage sanity on y = x + N(0,1)", c4_linear_coverage},
    {5, "val_weight endpoints", c5_val_weight},
    {6, "no-information error fast path", c6_no_info},
    {7, "TreeSHAP vs exact oracle", c7_tree_shap},
    {8, "drift attribution", c8_drift_attribution},
    {9, "KS and PSI", c9_ks_psi},
    {10, "determinism across --jobs", c10_determinism},
};

Args parse_args(int argc, char** argv) {
  Args a;
  if (const char* env = std::getenv("BOOTMON_DATA_DIR")) a.data_dir = env;
  a.jobs = std::max(1u, std::thread::hardware_concurrency());
  for (int i = 1; i < argc; ++i) {
    const std::string s = argv[i];
    auto next = [&]() -> std::string {
      if (i + 1 >= argc) throw ArgumentError(s + " needs a value");
      return argv[++i];
    };
    if (s == "--data-dir") {
      a.data_dir = next();
    } else if (s == "--jobs") {
      a.jobs = std::max<std::size_t>(1, std::stoul(next()));
    } else if (s == "--only") {
      std::stringstream list(next());
      for (std::string item; std::getline(list, item, ',');) {
        a.only.insert(std::stoi(item));
      }
    } else if (s == "--require-real-data") {
      a.require_real = true;
    } else {
      throw ArgumentError("unknown argument " + s);
    }
  }
  return a;
}

int run(int argc, char** argv) {
  const Args args = parse_args(argc, argv);
  Runs runs{args, {}, {}, {}};
  if (args.require_real && !runs.data().all_real) {
    std::cout << "SKIP  UCI datasets not found in '" << args.data_dir
              << "' (run 'bootmon fetch-data --data-dir DIR')\n";
    return kSkip;
  }
  int failures = 0;
  for (const auto& c : kCriteria) {
    if (!args.only.empty() && !args.only.contains(c.id)) continue;
    if (args.require_real && c.id > 3 && c.id != 10) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run(runs);
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
    failures += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  [" << c.id << "] " << c.name
              << ": " << v.detail << " (" << fmt(secs, 1) << " s)\n"
              << std::flush;
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace
}  // namespace bootmon

int main(int argc, char** argv) {
  try {
    return bootmon::run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "acceptance: " << e.what() << '\n';
    return 2;
  }
}
