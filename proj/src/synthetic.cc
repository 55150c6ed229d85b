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

#include "bootmon/synthetic.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "bootmon/error.h"
#include "bootmon/random.h"

namespace bootmon {
namespace {

constexpr std::size_t kCategoricalLevels = 5;

double normal(Rng& rng, double mu, double sd) {
  return mu + sd * standard_normal(rng);
}

}  // namespace

DatasetTable make_standin(const DatasetSchema& schema, std::uint64_t seed) {
  const std::vector<std::string> names = schema.feature_names();
  if (names.empty()) {
    throw DataError("no feature names known for '" + schema.name + "'");
  }
  const std::size_t n = schema.expected_rows.value_or(1000);
  const std::size_t d = names.size();
  const std::size_t k = std::max<std::size_t>(1, d / 2);
  Rng rng(derive_seed(seed, "standin", schema.name));

  Matrix loadings(d, k);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t f = 0; f < k; ++f) {
      loadings(j, f) = standard_normal(rng) / std::sqrt(static_cast<double>(k));
    }
  }
  std::vector<double> beta(d);
  for (auto& b : beta) b = standard_normal(rng);
  const std::size_t a = uniform_index(rng, d);
  const std::size_t b = uniform_index(rng, d);

  DatasetTable ds;
  ds.name = schema.name;
  ds.feature_names = names;
  ds.features = Matrix(n, d);
  ds.target.resize(n);
  std::vector<double> z(k);
  std::vector<double> raw(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : z) v = standard_normal(rng);
    for (std::size_t j = 0; j < d; ++j) {
      double v = 0.6 * standard_normal(rng);
      for (std::size_t f = 0; f < k; ++f) v += loadings(j, f) * z[f];
      raw[j] = v;
    }
    double signal = 0.5 * std::sin(2.0 * raw[a]) + 0.3 * raw[a] * raw[b];
    for (std::size_t j = 0; j < d; ++j) signal += 0.5 * beta[j] * raw[j];
    ds.target[i] = std::max(0.0, 20.0 + 3.0 * signal + normal(rng, 0.0, 1.0));
    for (std::size_t j = 0; j < d; ++j) {
      double v = raw[j];
      if (schema.is_categorical(names[j])) {
        const double level = std::floor((v + 2.0) / 4.0 * kCategoricalLevels);
        v = std::clamp(level, 0.0, static_cast<double>(kCategoricalLevels - 1));
      } else if (j % 3 == 1) {
        v = std::exp(0.5 * v);
      } else if (j % 3 == 2) {
        v = 10.0 * v + 50.0;
      }
      ds.features(i, j) = v;
    }
  }
  for (const auto& c : names) {
    if (!schema.is_categorical(c)) continue;
    auto& levels = ds.categorical_levels[c];
    for (std::size_t l = 0; l < kCategoricalLevels; ++l) {
      levels.push_back(std::to_string(l));
    }
  }
  return ds;
}

DatasetTable make_house_synth(std::size_t n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "house_synth"));
  DatasetTable ds;
  ds.name = "house_synth";
  ds.feature_names = {"GrLivArea", "TotalBsmtSF", "LotArea",
                      "YearBuilt", "OverallCond", "MoSold"};
  ds.features = Matrix(n, ds.feature_names.size());
  ds.target.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double living = std::round(std::exp(normal(rng, 7.1, 0.6)));
    const double basement =
        std::round(0.7 * living * std::exp(normal(rng, 0.0, 0.3)));
    const double lot = std::round(std::exp(normal(rng, 9.1, 0.45)));
    const double year = 1900.0 + static_cast<double>(uniform_index(rng, 111));
    const double cond =
        std::clamp(std::round(normal(rng, 5.5, 1.1)), 1.0, 9.0);
    const double month = 1.0 + static_cast<double>(uniform_index(rng, 12));
    const double price = 60.0 * living + 45.0 * basement +
                         250.0 * (year - 1950.0) + 1500.0 * (cond - 5.0) +
                         normal(rng, 0.0, 5.0 * living);
    const double row[] = {living, basement, lot, year, cond, month};
    std::copy(std::begin(row), std::end(row), ds.features.row(i).begin());
    ds.target[i] = std::max(1000.0, price);
  }
  return ds;
}

DatasetTable make_linear_synthetic(std::size_t n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "linear"));
  DatasetTable ds;
  ds.name = "linear";
  ds.feature_names = {"x"};
  ds.features = Matrix(n, 1);
  ds.target.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = standard_normal(rng);
    ds.features(i, 0) = x;
    ds.target[i] = x + standard_normal(rng);
  }
  return ds;
}

}  // namespace bootmon
