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

#ifndef BOOTMON_DATA_H_
#define BOOTMON_DATA_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bootmon/matrix.h"

namespace bootmon {

// A named numeric design matrix with its regression target.
struct DatasetTable {
  std::string name;
  std::vector<std::string> feature_names;
  Matrix features;
  std::vector<double> target;
  // Rows removed at load time because an entry was missing.
  std::size_t dropped_rows = 0;
  // Ordinal encoding of categorical source columns: column -> sorted labels.
  std::map<std::string, std::vector<std::string>> categorical_levels;

  std::size_t rows() const { return features.rows(); }
  std::size_t dims() const { return features.cols(); }

  // Throws ArgumentError for an unknown feature name.
  std::size_t feature_index(std::string_view feature) const;

  // Shape and naming checks; `min_rows` is 3 for freshly loaded tables.
  void validate(std::size_t min_rows = 1) const;

  DatasetTable subset(std::span<const std::size_t> row_indices) const;
};

enum class SourceFormat { kDelimited, kSpreadsheet, kGenerated };

// Per-dataset description of the upstream source file.
struct DatasetSchema {
  std::string name;
  std::string title;
  std::string group;  // "uci" for the coverage/monitoring benchmark set
  std::string url;
  std::string source_file;
  std::string archive_member;  // file inside a zip source, if any
  SourceFormat format = SourceFormat::kDelimited;
  // '\0' means runs of whitespace.
  char delimiter = ',';
  bool header = true;
  std::vector<std::string> columns;  // positional names (header-less files)
  std::string target;
  std::vector<std::string> drop;
  std::vector<std::string> categorical;
  std::vector<std::string> keep;  // if nonempty, the only features retained
  std::optional<std::size_t> expected_rows;
  std::optional<std::size_t> expected_features;
  std::string sha256;

  bool is_categorical(std::string_view column) const;
  // Feature names in canonical column order, filled in once a file is read
  // (or from `columns`/`keep` when known up front).
  std::vector<std::string> feature_names() const;
};

class DatasetRegistry {
 public:
  // Parses the plain-text registry format (INI-style sections, key = value).
  static DatasetRegistry parse(std::string_view text);
  static DatasetRegistry load(const std::filesystem::path& path);
  // The registry shipped in data/registry.txt, compiled in.
  static const DatasetRegistry& builtin();

  // Throws DataError for unknown names.
  const DatasetSchema& get(std::string_view name) const;
  bool contains(std::string_view name) const;
  std::vector<std::string> names() const;
  std::vector<std::string> group(std::string_view group) const;

 private:
  std::vector<DatasetSchema> entries_;
};

// Loads `path`, which is either the canonical CSV (header = feature names then
// "target") or the upstream delimited file described by the schema.
DatasetTable load_dataset(std::string_view name,
                          const std::filesystem::path& path,
                          const DatasetRegistry& registry =
                              DatasetRegistry::builtin());

// Parses a dataset from in-memory text following `schema`.
DatasetTable parse_dataset(const DatasetSchema& schema, std::string_view text);

DatasetTable read_canonical_csv(std::string_view name, std::string_view text);
std::string to_canonical_csv(const DatasetTable& ds);
void write_canonical_csv(const DatasetTable& ds,
                         const std::filesystem::path& path);

struct RowSplit {
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
};

// Uniform random partition with |test| = round(test_fraction * N).
RowSplit random_split_indices(std::size_t n, double test_fraction,
                              std::uint64_t seed);
std::pair<DatasetTable, DatasetTable> random_split(const DatasetTable& ds,
                                                   double test_fraction,
                                                   std::uint64_t seed);

struct SplitTriple {
  std::string feature;
  std::vector<std::size_t> lower_idx;
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> upper_idx;
  // Set when the sort feature is constant, in which case the split is
  // arbitrary (it follows row order).
  bool constant_feature = false;

  // lower, then train, then upper: the stable sort order of the feature.
  std::vector<std::size_t> sorted_order() const;
};

// Stable sort by `feature`, then three contiguous sections whose sizes differ
// by at most one; extra rows go to the lower section first.
SplitTriple sorted_three_way_split(const DatasetTable& ds,
                                   std::string_view feature);

struct WindowRange {
  std::size_t start;
  std::size_t end;  // exclusive
};

struct WindowPlan {
  std::size_t window_size;
  std::size_t stride;
  std::vector<WindowRange> window_ranges;
};

WindowPlan rolling_windows(std::size_t n_sorted, std::size_t window_size,
                           std::size_t stride);

// Returns a copy with `feature` increased by k sample standard deviations.
DatasetTable shift_feature(const DatasetTable& ds, std::string_view feature,
                           double k);

}  // namespace bootmon

#endif  // BOOTMON_DATA_H_
