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

#include "bootmon/models.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "json.hpp"

#include "bootmon/error.h"
#include "bootmon/random.h"

namespace bootmon {

namespace {

constexpr double kMaxLinkValue = 700.0;

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;
};

Standardizer standardizer_for(const Matrix& X,
                              std::span<const std::size_t> rows) {
  const std::size_t d = X.cols();
  const auto m = static_cast<double>(rows.size());
  Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
  for (std::size_t r : rows) {
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += X(r, j);
  }
  for (auto& v : s.mean) v /= m;
  std::vector<double> ss(d, 0.0);
  for (std::size_t r : rows) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = X(r, j) - s.mean[j];
      ss[j] += c * c;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    const double sd = std::sqrt(ss[j] / m);
    s.scale[j] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

// Z = [(x - mean) / scale] for the sampled rows, optionally with a leading
// column of ones.
Eigen::MatrixXd design(const Matrix& X, std::span<const std::size_t> rows,
                       const Standardizer& s, bool intercept) {
  const std::size_t d = X.cols();
  const std::size_t off = intercept ? 1 : 0;
  Eigen::MatrixXd Z(rows.size(), d + off);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (intercept) Z(i, 0) = 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      Z(i, j + off) = (X(rows[i], j) - s.mean[j]) / s.scale[j];
    }
  }
  return Z;
}

// Solves A x = b, adding a scaled ridge when A is singular or badly
// conditioned.
Eigen::VectorXd solve_spd(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                          double l2_ridge, bool& ridge_used) {
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() == Eigen::Success && llt.rcond() > 1e-12) {
    return llt.solve(b);
  }
  ridge_used = true;
  const double diag_scale =
      std::max(1.0, A.trace() / static_cast<double>(A.rows()));
  Eigen::MatrixXd R = A;
  R.diagonal().array() += l2_ridge * diag_scale;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(R);
  return ldlt.solve(b);
}

LinearParams to_raw_scale(const Eigen::VectorXd& gamma, double intercept,
                          const Standardizer& s) {
  LinearParams p;
  p.coef.resize(s.mean.size());
  p.intercept = intercept;
  for (std::size_t j = 0; j < s.mean.size(); ++j) {
    p.coef[j] = gamma(static_cast<Eigen::Index>(j)) / s.scale[j];
    p.intercept -= p.coef[j] * s.mean[j];
  }
  return p;
}

FittedModel fit_ols(const EstimatorSpec& spec, const Matrix& X,
                    std::span<const double> y,
                    std::span<const std::size_t> rows) {
  const Standardizer s = standardizer_for(X, rows);
  const Eigen::MatrixXd Z = design(X, rows, s, false);
  double y_mean = 0.0;
  for (std::size_t r : rows) y_mean += y[r];
  y_mean /= static_cast<double>(rows.size());
  Eigen::VectorXd yc(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) yc(i) = y[rows[i]] - y_mean;

  FitDiagnostics diag;
  const Eigen::MatrixXd A = Z.transpose() * Z;
  const Eigen::VectorXd b = Z.transpose() * yc;
  const Eigen::VectorXd gamma =
      solve_spd(A, b, spec.hyper.l2_ridge, diag.ridge_fallback);
  return FittedModel(spec, X.cols(), to_raw_scale(gamma, y_mean, s), diag);
}

double poisson_deviance(std::span<const double> y, const Eigen::VectorXd& mu) {
  double dev = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double m = mu(static_cast<Eigen::Index>(i));
    const double term = y[i] > 0.0 ? y[i] * std::log(y[i] / m) : 0.0;
    dev += 2.0 * (term - (y[i] - m));
  }
  return dev;
}

FittedModel fit_poisson(const EstimatorSpec& spec, const Matrix& X,
                        std::span<const double> y_all,
                        std::span<const std::size_t> rows) {
  const std::size_t d = X.cols();
  std::vector<double> y(rows.size());
  double y_mean = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    y[i] = y_all[rows[i]];
    if (y[i] < 0.0) throw ArgumentError("poisson: negative target");
    y_mean += y[i];
  }
  y_mean /= static_cast<double>(rows.size());
  const Standardizer s = standardizer_for(X, rows);
  FitDiagnostics diag;
  if (y_mean <= 0.0) {
    // All-zero targets: the likelihood has no finite maximiser.
    LinearParams p;
    p.intercept = -kMaxLinkValue;
    p.coef.assign(d, 0.0);
    diag.converged = false;
    return FittedModel(spec, d, p, diag);
  }

  const Eigen::MatrixXd Z = design(X, rows, s, true);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d + 1));
  beta(0) = std::log(y_mean);
  auto mean_of = [&](const Eigen::VectorXd& b) {
    Eigen::VectorXd eta = Z * b;
    return Eigen::VectorXd(
        eta.array().min(kMaxLinkValue).max(-kMaxLinkValue).exp());
  };
  Eigen::VectorXd mu = mean_of(beta);
  double dev = poisson_deviance(y, mu);
  diag.converged = false;
  for (std::size_t it = 0; it < spec.hyper.glm_max_iter; ++it) {
    diag.iterations = it + 1;
    const Eigen::VectorXd eta = Z * beta;
    Eigen::VectorXd work(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      work(i) = eta(i) + (y[static_cast<std::size_t>(i)] - mu(i)) / mu(i);
    }
    const Eigen::MatrixXd A = Z.transpose() * mu.asDiagonal() * Z;
    const Eigen::VectorXd b = Z.transpose() * (mu.array() * work.array()).matrix();
    Eigen::VectorXd next =
        solve_spd(A, b, spec.hyper.l2_ridge, diag.ridge_fallback);
    Eigen::VectorXd next_mu = mean_of(next);
    double next_dev = poisson_deviance(y, next_mu);
    for (int halving = 0; halving < 30 && !(next_dev <= dev * (1 + 1e-12));
         ++halving) {
      next = (beta + next) / 2.0;
      next_mu = mean_of(next);
      next_dev = poisson_deviance(y, next_mu);
    }
    const double change = std::abs(next_dev - dev) / (std::abs(next_dev) + 0.1);
    beta = next;
    mu = next_mu;
    dev = next_dev;
    if (change < spec.hyper.glm_tol) {
      diag.converged = true;
      break;
    }
  }
  Eigen::VectorXd gamma = beta.tail(static_cast<Eigen::Index>(d));
  return FittedModel(spec, d, to_raw_scale(gamma, beta(0), s), diag);
}

FittedModel fit_trees(const EstimatorSpec& spec, const Matrix& X,
                      std::span<const double> y,
                      std::span<const std::size_t> rows, std::uint64_t seed,
                      const ColumnOrder& order) {
  const auto& h = spec.hyper;
  const std::size_t d = X.cols();
  TreeEnsembleParams p;
  TreeParams tp{h.max_depth, h.min_samples_leaf, 0};
  switch (spec.kind) {
    case ModelKind::kCart: {
      TreeBuilder builder(X, rows, order, tp);
      p.trees.push_back(builder.build(y));
      p.weights.push_back(1.0);
      break;
    }
    case ModelKind::kRandomForest: {
      if (h.n_trees == 0) throw ArgumentError("random_forest: n_trees == 0");
      tp.max_features = h.max_features > 0 ? h.max_features : (d + 2) / 3;
      const double w = 1.0 / static_cast<double>(h.n_trees);
      std::vector<std::size_t> sample(rows.size());
      for (std::size_t t = 0; t < h.n_trees; ++t) {
        Rng rng(derive_seed(seed, "tree", t));
        if (h.bootstrap) {
          for (auto& s : sample) s = rows[uniform_index(rng, rows.size())];
        } else {
          std::copy(rows.begin(), rows.end(), sample.begin());
        }
        TreeBuilder builder(X, sample, order, tp);
        p.trees.push_back(builder.build(y, &rng));
        p.weights.push_back(w);
      }
      break;
    }
    case ModelKind::kGradientBoosting: {
      double base = 0.0;
      for (std::size_t r : rows) base += y[r];
      base /= static_cast<double>(rows.size());
      p.offset = base;
      std::vector<std::size_t> unique_rows(rows.begin(), rows.end());
      std::sort(unique_rows.begin(), unique_rows.end());
      unique_rows.erase(std::unique(unique_rows.begin(), unique_rows.end()),
                        unique_rows.end());
      std::vector<double> fitted(X.rows(), base);
      std::vector<double> residual(X.rows(), 0.0);
      TreeBuilder builder(X, rows, order, tp);
      for (std::size_t round = 0; round < h.n_rounds; ++round) {
        for (std::size_t r : unique_rows) residual[r] = y[r] - fitted[r];
        Tree tree = builder.build(residual);
        for (std::size_t r : unique_rows) {
          fitted[r] += h.learning_rate * tree.predict(X.row(r));
        }
        p.trees.push_back(std::move(tree));
        p.weights.push_back(h.learning_rate);
      }
      break;
    }
    default:
      throw ArgumentError("fit_trees: not a tree model");
  }
  return FittedModel(spec, d, std::move(p));
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kOls:
      return "ols";
    case ModelKind::kPoisson:
      return "poisson";
    case ModelKind::kCart:
      return "cart";
    case ModelKind::kRandomForest:
      return "random_forest";
    case ModelKind::kGradientBoosting:
      return "gradient_boosting";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  for (ModelKind k : {ModelKind::kOls, ModelKind::kPoisson, ModelKind::kCart,
                      ModelKind::kRandomForest,
                      ModelKind::kGradientBoosting}) {
    if (to_string(k) == name) return k;
  }
  throw ArgumentError("unknown model kind '" + std::string(name) + "'");
}

bool is_tree_based(ModelKind kind) {
  return kind == ModelKind::kCart || kind == ModelKind::kRandomForest ||
         kind == ModelKind::kGradientBoosting;
}

EstimatorSpec EstimatorSpec::defaults(ModelKind kind) {
  EstimatorSpec s;
  s.kind = kind;
  if (kind == ModelKind::kGradientBoosting) s.hyper.max_depth = 3;
  return s;
}

std::string EstimatorSpec::to_config() const {
  std::ostringstream out;
  out.precision(17);
  out << "kind = " << to_string(kind) << '\n'
      << "max_depth = " << hyper.max_depth << '\n'
      << "min_samples_leaf = " << hyper.min_samples_leaf << '\n'
      << "n_trees = " << hyper.n_trees << '\n'
      << "max_features = " << hyper.max_features << '\n'
      << "bootstrap = " << (hyper.bootstrap ? "true" : "false") << '\n'
      << "learning_rate = " << hyper.learning_rate << '\n'
      << "n_rounds = " << hyper.n_rounds << '\n'
      << "l2_ridge = " << hyper.l2_ridge << '\n'
      << "glm_max_iter = " << hyper.glm_max_iter << '\n'
      << "glm_tol = " << hyper.glm_tol << '\n';
  return out.str();
}

EstimatorSpec EstimatorSpec::from_config(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> kv;
  std::istringstream in{std::string(text)};
  std::string line;
  auto strip = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  std::optional<ModelKind> kind;
  while (std::getline(in, line)) {
    line = strip(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ArgumentError("estimator config: expected key = value: " + line);
    }
    auto key = strip(line.substr(0, eq));
    auto value = strip(line.substr(eq + 1));
    if (key == "kind") {
      kind = parse_model_kind(value);
    } else {
      kv.emplace_back(std::move(key), std::move(value));
    }
  }
  if (!kind) throw ArgumentError("estimator config: missing 'kind'");
  EstimatorSpec s = defaults(*kind);
  auto& h = s.hyper;
  for (const auto& [key, value] : kv) {
    try {
      if (key == "max_depth") {
        h.max_depth = std::stoul(value);
      } else if (key == "min_samples_leaf") {
        h.min_samples_leaf = std::stoul(value);
      } else if (key == "n_trees") {
        h.n_trees = std::stoul(value);
      } else if (key == "max_features") {
        h.max_features = std::stoul(value);
      } else if (key == "bootstrap") {
        if (value != "true" && value != "false") {
          throw ArgumentError("bootstrap must be true or false");
        }
        h.bootstrap = value == "true";
      } else if (key == "learning_rate") {
        h.learning_rate = std::stod(value);
      } else if (key == "n_rounds") {
        h.n_rounds = std::stoul(value);
      } else if (key == "l2_ridge") {
        h.l2_ridge = std::stod(value);
      } else if (key == "glm_max_iter") {
        h.glm_max_iter = std::stoul(value);
      } else if (key == "glm_tol") {
        h.glm_tol = std::stod(value);
      } else {
        throw ArgumentError("estimator config: unknown key '" + key + "'");
      }
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const ArgumentError*>(&e)) throw;
      throw ArgumentError("estimator config: bad value for '" + key +
                          "': " + value);
    }
  }
  if (h.min_samples_leaf == 0 || !(h.learning_rate > 0.0) ||
      !(h.l2_ridge > 0.0) || !(h.glm_tol > 0.0) || h.glm_max_iter == 0) {
    throw ArgumentError("estimator config: hyperparameters must be positive");
  }
  return s;
}

FittedModel::FittedModel(EstimatorSpec spec, std::size_t train_dim,
                         std::variant<LinearParams, TreeEnsembleParams> params,
                         FitDiagnostics diagnostics)
    : spec_(std::move(spec)),
      train_dim_(train_dim),
      params_(std::move(params)),
      diagnostics_(diagnostics) {}

double FittedModel::predict_row(std::span<const double> x) const {
  if (x.size() != train_dim_) {
    throw ArgumentError("predict: expected " + std::to_string(train_dim_) +
                        " features, got " + std::to_string(x.size()));
  }
  if (const auto* lin = std::get_if<LinearParams>(&params_)) {
    double eta = lin->intercept;
    for (std::size_t j = 0; j < train_dim_; ++j) eta += lin->coef[j] * x[j];
    if (spec_.kind == ModelKind::kPoisson) {
      return std::exp(std::clamp(eta, -kMaxLinkValue, kMaxLinkValue));
    }
    return eta;
  }
  const auto& ens = std::get<TreeEnsembleParams>(params_);
  double out = ens.offset;
  for (std::size_t t = 0; t < ens.trees.size(); ++t) {
    out += ens.weights[t] * ens.trees[t].predict(x);
  }
  return out;
}

std::vector<double> FittedModel::predict(const Matrix& X) const {
  if (X.cols() != train_dim_) {
    throw ArgumentError("predict: expected " + std::to_string(train_dim_) +
                        " features, got " + std::to_string(X.cols()));
  }
  std::vector<double> out(X.rows());
  if (const auto* ens = std::get_if<TreeEnsembleParams>(&params_)) {
    // Tree-major order keeps each tree hot in cache; the summation order per
    // row matches predict_row exactly.
    std::fill(out.begin(), out.end(), ens->offset);
    for (std::size_t t = 0; t < ens->trees.size(); ++t) {
      ens->trees[t].predict_add(X, ens->weights[t], out);
    }
    return out;
  }
  for (std::size_t r = 0; r < X.rows(); ++r) out[r] = predict_row(X.row(r));
  return out;
}

FittedModel fit_rows(const EstimatorSpec& spec, const Matrix& X,
                     std::span<const double> y,
                     std::span<const std::size_t> rows, std::uint64_t seed,
                     const ColumnOrder* presorted) {
  if (X.rows() != y.size()) {
    throw ArgumentError("fit: X has " + std::to_string(X.rows()) +
                        " rows but y has " + std::to_string(y.size()));
  }
  if (rows.size() < 2) throw ArgumentError("fit: need at least 2 rows");
  if (X.cols() == 0) throw ArgumentError("fit: no features");
  for (std::size_t r : rows) {
    if (r >= X.rows()) throw ArgumentError("fit: row index out of range");
  }
  switch (spec.kind) {
    case ModelKind::kOls:
      return fit_ols(spec, X, y, rows);
    case ModelKind::kPoisson:
      return fit_poisson(spec, X, y, rows);
    default:
      break;
  }
  if (presorted != nullptr) return fit_trees(spec, X, y, rows, seed, *presorted);
  const ColumnOrder order(X);
  return fit_trees(spec, X, y, rows, seed, order);
}

FittedModel fit(const EstimatorSpec& spec, const Matrix& X,
                std::span<const double> y, std::uint64_t seed) {
  std::vector<std::size_t> rows(X.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return fit_rows(spec, X, y, rows, seed);
}

std::vector<double> predict(const FittedModel& model, const Matrix& X) {
  return model.predict(X);
}

TreeDecomposition trees_of(const FittedModel& model) {
  const auto* ens = std::get_if<TreeEnsembleParams>(&model.params());
  if (ens == nullptr) {
    throw ArgumentError("trees_of: " + std::string(to_string(model.spec().kind)) +
                        " is not tree-based");
  }
  TreeDecomposition out;
  out.offset = ens->offset;
  for (std::size_t t = 0; t < ens->trees.size(); ++t) {
    out.trees.push_back({&ens->trees[t], ens->weights[t]});
  }
  return out;
}

namespace {
constexpr int kModelFormatVersion = 1;
}  // namespace

std::string model_to_json(const FittedModel& model) {
  using nlohmann::json;
  json doc;
  doc["format"] = "bootmon-model";
  doc["version"] = kModelFormatVersion;
  doc["spec"] = model.spec().to_config();
  doc["train_dim"] = model.train_dim();
  const auto& diag = model.diagnostics();
  doc["diagnostics"] = {{"ridge_fallback", diag.ridge_fallback},
                        {"converged", diag.converged},
                        {"iterations", diag.iterations}};
  if (const auto* lin = std::get_if<LinearParams>(&model.params())) {
    doc["linear"] = {{"intercept", lin->intercept}, {"coef", lin->coef}};
  } else {
    const auto& ens = std::get<TreeEnsembleParams>(model.params());
    json trees = json::array();
    for (std::size_t t = 0; t < ens.trees.size(); ++t) {
      json nodes = json::array();
      for (const auto& n : ens.trees[t].nodes()) {
        nodes.push_back(
            {n.feature, n.threshold, n.left, n.right, n.value, n.cover});
      }
      trees.push_back({{"weight", ens.weights[t]}, {"nodes", nodes}});
    }
    doc["ensemble"] = {{"offset", ens.offset}, {"trees", trees}};
  }
  return doc.dump();
}

FittedModel model_from_json(std::string_view text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("model json: ") + e.what());
  }
  try {
    if (doc.at("format") != "bootmon-model") {
      throw DataError("model json: not a bootmon model document");
    }
    if (doc.at("version").get<int>() != kModelFormatVersion) {
      throw DataError("model json: unsupported version " +
                      doc.at("version").dump());
    }
    const EstimatorSpec spec =
        EstimatorSpec::from_config(doc.at("spec").get<std::string>());
    const auto d = doc.at("train_dim").get<std::size_t>();
    FitDiagnostics diag;
    diag.ridge_fallback = doc.at("diagnostics").at("ridge_fallback");
    diag.converged = doc.at("diagnostics").at("converged");
    diag.iterations = doc.at("diagnostics").at("iterations");
    if (doc.contains("linear")) {
      LinearParams p;
      p.intercept = doc["linear"].at("intercept");
      p.coef = doc["linear"].at("coef").get<std::vector<double>>();
      if (p.coef.size() != d) throw DataError("model json: coef size");
      return FittedModel(spec, d, p, diag);
    }
    TreeEnsembleParams p;
    p.offset = doc.at("ensemble").at("offset");
    for (const auto& t : doc["ensemble"].at("trees")) {
      std::vector<TreeNode> nodes;
      for (const auto& n : t.at("nodes")) {
        TreeNode node;
        node.feature = n.at(0);
        node.threshold = n.at(1);
        node.left = n.at(2);
        node.right = n.at(3);
        node.value = n.at(4);
        node.cover = n.at(5);
        nodes.push_back(node);
      }
      const auto count = static_cast<std::int32_t>(nodes.size());
      for (const auto& node : nodes) {
        if (node.is_leaf()) continue;
        if (node.feature >= static_cast<std::int32_t>(d) || node.left <= 0 ||
            node.right <= 0 || node.left >= count || node.right >= count) {
          throw DataError("model json: malformed tree node");
        }
      }
      p.trees.emplace_back(std::move(nodes));
      p.weights.push_back(t.at("weight"));
    }
    return FittedModel(spec, d, std::move(p), diag);
  } catch (const json::exception& e) {
    throw DataError(std::string("model json: ") + e.what());
  } catch (const ArgumentError& e) {
    throw DataError(std::string("model json: ") + e.what());
  }
}

}  // namespace bootmon
