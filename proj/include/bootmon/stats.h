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

#ifndef BOOTMON_STATS_H_
#define BOOTMON_STATS_H_

#include <span>
#include <string>
#include <vector>

namespace bootmon {

double mean(std::span<const double> v);
// n-1 denominator. Returns 0 for fewer than two values.
double sample_std(std::span<const double> v);
double population_std(std::span<const double> v);

// Linear interpolation between order statistics ("type 7"). `sorted` must be
// ascending and nonempty; p is clamped to [0, 1].
double quantile_sorted(std::span<const double> sorted, double p);
double quantile(std::vector<double> values, double p);

// Coefficient of determination. Returns 0 when the truth has no variance.
double r_squared(std::span<const double> truth, std::span<const double> pred);

double mean_squared_error(std::span<const double> truth,
                          std::span<const double> pred);

// Shortest representation that parses back to the same double.
std::string format_double(double v);

}  // namespace bootmon

#endif  // BOOTMON_STATS_H_
