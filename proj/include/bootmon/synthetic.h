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

#ifndef BOOTMON_SYNTHETIC_H_
#define BOOTMON_SYNTHETIC_H_

#include <cstddef>
#include <cstdint>

#include "bootmon/data.h"

namespace bootmon {

// Offline stand-in for a registry dataset: same name, feature names, row
// count and categorical columns, with a smooth nonlinear positive target
// driven by correlated features. Not a substitute for the real data.
DatasetTable make_standin(const DatasetSchema& schema, std::uint64_t seed);

// House-prices analogue. GrLivArea and TotalBsmtSF (skewed, correlated) drive
// SalePrice; LotArea, YearBuilt, OverallCond and MoSold are weak or pure
// nuisance features.
DatasetTable make_house_synth(std::size_t n = 1460, std::uint64_t seed = 0);

// y = x + N(0, 1) with x ~ N(0, 1); a single feature named "x".
DatasetTable make_linear_synthetic(std::size_t n, std::uint64_t seed);

}  // namespace bootmon

#endif  // BOOTMON_SYNTHETIC_H_
