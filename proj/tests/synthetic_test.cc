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

#include <algorithm>
#include <cmath>

#include "gtest/gtest.h"

#include "bootmon/data.h"
#include "bootmon/stats.h"
#include "bootmon/synthetic.h"

namespace bootmon {
namespace {

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = mean(a);
  const double mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

TEST(Standin, MatchesRegistryShape) {
  const auto& reg = DatasetRegistry::builtin();
  for (const auto& name : reg.group("uci")) {
    const DatasetSchema& schema = reg.get(name);
    const DatasetTable ds = make_standin(schema, 1);
    EXPECT_EQ(ds.name, name);
    EXPECT_EQ(ds.rows(), schema.expected_rows.value());
    EXPECT_EQ(ds.dims(), schema.expected_features.value()) << name;
    EXPECT_EQ(ds.feature_names, schema.feature_names());
    EXPECT_NO_THROW(ds.validate(3));
    for (double y : ds.target) EXPECT_GE(y, 0.0);
    for (const auto& c : schema.categorical) {
      ASSERT_TRUE(ds.categorical_levels.contains(c));
      const auto col = ds.features.column(ds.feature_index(c));
      for (double v : col) EXPECT_EQ(v, std::round(v));
    }
  }
}

TEST(Standin, DeterministicAndSeedSensitive) {
  const DatasetSchema& schema = DatasetRegistry::builtin().get("concrete");
  EXPECT_EQ(to_canonical_csv(make_standin(schema, 3)),
            to_canonical_csv(make_standin(schema, 3)));
  EXPECT_NE(to_canonical_csv(make_standin(schema, 3)),
            to_canonical_csv(make_standin(schema, 4)));
}

TEST(HouseSynth, SubstantiveFeaturesDriveThePrice) {
  const DatasetTable ds = make_house_synth();
  const DatasetSchema& schema = DatasetRegistry::builtin().get("house_synth");
  EXPECT_EQ(ds.rows(), 1460u);
  EXPECT_EQ(ds.feature_names, schema.feature_names());
  EXPECT_GT(correlation(ds.features.column(0), ds.target), 0.7);
  EXPECT_GT(correlation(ds.features.column(1), ds.target), 0.6);
  EXPECT_LT(std::abs(correlation(ds.features.column(5), ds.target)), 0.1);
}

TEST(LinearSynthetic, UnitSlopeUnitNoise) {
  const DatasetTable ds = make_linear_synthetic(20000, 2);
  std::vector<double> resid(ds.rows());
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    resid[i] = ds.target[i] - ds.features(i, 0);
  }
  EXPECT_NEAR(mean(resid), 0.0, 0.03);
  EXPECT_NEAR(sample_std(resid), 1.0, 0.03);
}

}  // namespace
}  // namespace bootmon
