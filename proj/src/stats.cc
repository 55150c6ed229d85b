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

#include "bootmon/stats.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace bootmon {

double mean(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("mean: empty input");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

namespace {
double sum_sq_dev(std::span<const double> v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s;
}
}  // namespace

double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  return std::sqrt(sum_sq_dev(v) / static_cast<double>(v.size() - 1));
}

double population_std(std::span<const double> v) {
  return std::sqrt(sum_sq_dev(v) / static_cast<double>(v.size()));
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile: empty input");
  p = std::clamp(p, 0.0, 1.0);
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double quantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, p);
}

double r_squared(std::span<const double> truth, std::span<const double> pred) {
  if (truth.size() != pred.size() || truth.empty()) {
    throw std::invalid_argument("r_squared: length mismatch or empty");
  }
  const double total = sum_sq_dev(truth);
  if (total <= 0.0) return 0.0;
  double resid = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    resid += (truth[i] - pred[i]) * (truth[i] - pred[i]);
  }
  return 1.0 - resid / total;
}

double mean_squared_error(std::span<const double> truth,
                          std::span<const double> pred) {
  if (truth.size() != pred.size()) {
    throw std::invalid_argument("mean_squared_error: length mismatch");
  }
  if (truth.empty()) throw std::invalid_argument("mean_squared_error: empty");
  double s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    s += (truth[i] - pred[i]) * (truth[i] - pred[i]);
  }
  return s / static_cast<double>(truth.size());
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, end);
}

}  // namespace bootmon
