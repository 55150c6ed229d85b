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

#include "bootmon/data.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "bootmon/error.h"
#include "bootmon/random.h"
#include "bootmon/stats.h"

namespace bootmon {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' ||
                        s.front() == '\r' || s.front() == '\n')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                        s.back() == '\r' || s.back() == '\n')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t next = s.find(',', pos);
    const auto piece =
        trim(s.substr(pos, next == std::string_view::npos ? s.npos
                                                          : next - pos));
    if (!piece.empty()) out.emplace_back(piece);
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

// Splits one record. Double quotes group delimiters for character
// delimiters; '\0' splits on whitespace runs.
std::vector<std::string> split_fields(std::string_view line, char delim) {
  std::vector<std::string> fields;
  if (delim == '\0') {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      if (i >= line.size()) break;
      std::size_t j = i;
      while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
      fields.emplace_back(line.substr(i, j - i));
      i = j;
    }
    return fields;
  }
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t next = text.find('\n', pos);
    if (next == std::string_view::npos) next = text.size();
    auto line = text.substr(pos, next - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = next + 1;
  }
  return lines;
}

bool is_missing(std::string_view s) {
  return s.empty() || s == "?" || s == "NA" || s == "N/A" || s == "nan" ||
         s == "NaN" || s == "NAN";
}

std::optional<double> parse_number(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

char parse_delimiter(std::string_view v) {
  if (v == "tab") return '\t';
  if (v == "comma") return ',';
  if (v == "semicolon") return ';';
  if (v == "whitespace") return '\0';
  if (v.size() == 1) return v[0];
  throw DataError("registry: unknown delimiter '" + std::string(v) + "'");
}

void check_expected_shape(const DatasetSchema& schema,
                          const DatasetTable& ds) {
  if (schema.expected_rows && ds.rows() != *schema.expected_rows) {
    throw DataError(schema.name + ": expected " +
                    std::to_string(*schema.expected_rows) + " rows, got " +
                    std::to_string(ds.rows()));
  }
  if (schema.expected_features && ds.dims() != *schema.expected_features) {
    throw DataError(schema.name + ": expected " +
                    std::to_string(*schema.expected_features) +
                    " features, got " + std::to_string(ds.dims()));
  }
}

}  // namespace

std::size_t DatasetTable::feature_index(std::string_view feature) const {
  for (std::size_t j = 0; j < feature_names.size(); ++j) {
    if (feature_names[j] == feature) return j;
  }
  throw ArgumentError("unknown feature '" + std::string(feature) + "' in " +
                      name);
}

void DatasetTable::validate(std::size_t min_rows) const {
  if (features.rows() != target.size()) {
    throw DataError(name + ": feature/target row count mismatch");
  }
  if (feature_names.size() != features.cols()) {
    throw DataError(name + ": feature name count does not match columns");
  }
  if (rows() < min_rows) {
    throw DataError(name + ": need at least " + std::to_string(min_rows) +
                    " rows, got " + std::to_string(rows()));
  }
  if (dims() < 1) throw DataError(name + ": no feature columns");
  std::set<std::string> seen;
  for (const auto& f : feature_names) {
    if (!seen.insert(f).second) {
      throw DataError(name + ": duplicate feature name '" + f + "'");
    }
  }
}

DatasetTable DatasetTable::subset(
    std::span<const std::size_t> row_indices) const {
  DatasetTable out;
  out.name = name;
  out.feature_names = feature_names;
  out.features = features.select_rows(row_indices);
  out.target = select<double>(target, row_indices);
  out.categorical_levels = categorical_levels;
  return out;
}

bool DatasetSchema::is_categorical(std::string_view column) const {
  return std::find(categorical.begin(), categorical.end(), column) !=
         categorical.end();
}

std::vector<std::string> DatasetSchema::feature_names() const {
  if (!keep.empty()) return keep;
  std::vector<std::string> out;
  for (const auto& c : columns) {
    if (c == target) continue;
    if (std::find(drop.begin(), drop.end(), c) != drop.end()) continue;
    out.push_back(c);
  }
  return out;
}

DatasetRegistry DatasetRegistry::parse(std::string_view text) {
  DatasetRegistry reg;
  DatasetSchema* cur = nullptr;
  const auto lines = split_lines(text);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const auto line = trim(lines[ln]);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw DataError("registry line " + std::to_string(ln + 1) +
                        ": bad section header");
      }
      reg.entries_.emplace_back();
      cur = &reg.entries_.back();
      cur->name = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos || cur == nullptr) {
      throw DataError("registry line " + std::to_string(ln + 1) +
                      ": expected 'key = value' inside a section");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key == "title") {
      cur->title = value;
    } else if (key == "group") {
      cur->group = value;
    } else if (key == "url") {
      cur->url = value;
    } else if (key == "source") {
      cur->source_file = value;
    } else if (key == "archive_member") {
      cur->archive_member = value;
    } else if (key == "format") {
      if (value == "delimited") {
        cur->format = SourceFormat::kDelimited;
      } else if (value == "spreadsheet") {
        cur->format = SourceFormat::kSpreadsheet;
      } else if (value == "generated") {
        cur->format = SourceFormat::kGenerated;
      } else {
        throw DataError("registry: unknown format '" + std::string(value) +
                        "'");
      }
    } else if (key == "delimiter") {
      cur->delimiter = parse_delimiter(value);
    } else if (key == "header") {
      cur->header = value == "true";
    } else if (key == "columns") {
      cur->columns = split_list(value);
    } else if (key == "target") {
      cur->target = value;
    } else if (key == "drop") {
      cur->drop = split_list(value);
    } else if (key == "categorical") {
      cur->categorical = split_list(value);
    } else if (key == "keep") {
      cur->keep = split_list(value);
    } else if (key == "rows") {
      cur->expected_rows = std::stoul(std::string(value));
    } else if (key == "features") {
      cur->expected_features = std::stoul(std::string(value));
    } else if (key == "sha256") {
      cur->sha256 = value;
    } else {
      throw DataError("registry line " + std::to_string(ln + 1) +
                      ": unknown key '" + std::string(key) + "'");
    }
  }
  for (const auto& e : reg.entries_) {
    if (e.target.empty()) {
      throw DataError("registry: entry '" + e.name + "' has no target");
    }
  }
  return reg;
}

DatasetRegistry DatasetRegistry::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

const DatasetSchema& DatasetRegistry::get(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e;
  }
  throw DataError("unknown dataset '" + std::string(name) + "'");
}

bool DatasetRegistry::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.name == name; });
}

std::vector<std::string> DatasetRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

std::vector<std::string> DatasetRegistry::group(std::string_view g) const {
  std::vector<std::string> out;
  for (const auto& e : entries_) {
    if (e.group == g) out.push_back(e.name);
  }
  return out;
}

DatasetTable parse_dataset(const DatasetSchema& schema,
                           std::string_view text) {
  const auto lines = split_lines(text);
  std::size_t ln = 0;
  auto skip_blank = [&] {
    while (ln < lines.size() && trim(lines[ln]).empty()) ++ln;
  };
  skip_blank();
  if (ln >= lines.size()) throw DataError(schema.name + ": empty file");

  std::vector<std::string> names = schema.columns;
  if (schema.header) {
    auto header = split_fields(lines[ln], schema.delimiter);
    if (names.empty()) {
      for (auto& h : header) names.emplace_back(trim(h));
    } else if (header.size() != names.size()) {
      throw DataError(schema.name + ": line " + std::to_string(ln + 1) +
                      ": header has " + std::to_string(header.size()) +
                      " fields, registry lists " +
                      std::to_string(names.size()));
    }
    ++ln;
  }
  if (names.empty()) {
    throw DataError(schema.name + ": no column names in file or registry");
  }

  const auto target_it = std::find(names.begin(), names.end(), schema.target);
  if (target_it == names.end()) {
    throw DataError(schema.name + ": target column '" + schema.target +
                    "' not found");
  }
  const std::size_t target_col = target_it - names.begin();

  // Retained feature columns, in file order (or keep order).
  std::vector<std::size_t> feature_cols;
  if (!schema.keep.empty()) {
    for (const auto& k : schema.keep) {
      const auto it = std::find(names.begin(), names.end(), k);
      if (it == names.end()) {
        throw DataError(schema.name + ": kept column '" + k + "' not found");
      }
      feature_cols.push_back(it - names.begin());
    }
  } else {
    for (std::size_t c = 0; c < names.size(); ++c) {
      if (c == target_col) continue;
      if (std::find(schema.drop.begin(), schema.drop.end(), names[c]) !=
          schema.drop.end()) {
        continue;
      }
      feature_cols.push_back(c);
    }
  }
  if (schema.is_categorical(schema.target)) {
    throw DataError(schema.name + ": categorical target is not supported");
  }

  const std::size_t d = feature_cols.size();
  std::vector<std::vector<std::string>> labels(d);
  std::vector<double> numeric;
  std::vector<double> target;
  std::size_t dropped = 0;
  std::size_t kept_rows = 0;

  for (; ln < lines.size(); ++ln) {
    if (trim(lines[ln]).empty()) continue;
    const auto fields = split_fields(lines[ln], schema.delimiter);
    if (fields.size() != names.size()) {
      throw DataError(schema.name + ": line " + std::to_string(ln + 1) +
                      ": expected " + std::to_string(names.size()) +
                      " fields, got " + std::to_string(fields.size()));
    }
    bool missing = is_missing(trim(fields[target_col]));
    for (std::size_t c : feature_cols) {
      missing = missing || is_missing(trim(fields[c]));
    }
    if (missing) {
      ++dropped;
      continue;
    }
    auto parse_or_throw = [&](std::size_t c) {
      const auto v = parse_number(trim(fields[c]));
      if (!v) {
        throw DataError(schema.name + ": line " + std::to_string(ln + 1) +
                        ": column '" + names[c] + "' is not numeric: '" +
                        fields[c] + "'");
      }
      return *v;
    };
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t c = feature_cols[j];
      if (schema.is_categorical(names[c])) {
        labels[j].emplace_back(trim(fields[c]));
        numeric.push_back(0.0);
      } else {
        numeric.push_back(parse_or_throw(c));
      }
    }
    target.push_back(parse_or_throw(target_col));
    ++kept_rows;
  }
  if (kept_rows == 0) throw DataError(schema.name + ": no data rows");

  DatasetTable ds;
  ds.name = schema.name;
  for (std::size_t c : feature_cols) ds.feature_names.push_back(names[c]);
  ds.features = Matrix(kept_rows, d, std::move(numeric));
  ds.target = std::move(target);
  ds.dropped_rows = dropped;
  for (std::size_t j = 0; j < d; ++j) {
    if (!schema.is_categorical(ds.feature_names[j])) continue;
    std::vector<std::string> levels = labels[j];
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    for (std::size_t r = 0; r < kept_rows; ++r) {
      const auto it =
          std::lower_bound(levels.begin(), levels.end(), labels[j][r]);
      ds.features(r, j) = static_cast<double>(it - levels.begin());
    }
    ds.categorical_levels[ds.feature_names[j]] = std::move(levels);
  }
  ds.validate(3);
  return ds;
}

DatasetTable read_canonical_csv(std::string_view name, std::string_view text) {
  DatasetSchema schema;
  schema.name = std::string(name);
  schema.target = "target";
  schema.delimiter = ',';
  schema.header = true;
  return parse_dataset(schema, text);
}

std::string to_canonical_csv(const DatasetTable& ds) {
  ds.validate();
  std::string out;
  for (const auto& f : ds.feature_names) {
    if (f.find_first_of(",\"\n\r") != std::string::npos || f == "target") {
      throw DataError(ds.name + ": feature name '" + f +
                      "' cannot be written to canonical CSV");
    }
    out += f;
    out += ',';
  }
  out += "target\n";
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    for (double v : ds.features.row(r)) {
      out += format_double(v);
      out += ',';
    }
    out += format_double(ds.target[r]);
    out += '\n';
  }
  return out;
}

void write_canonical_csv(const DatasetTable& ds,
                         const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_canonical_csv(ds);
}

DatasetTable load_dataset(std::string_view name,
                          const std::filesystem::path& path,
                          const DatasetRegistry& registry) {
  const DatasetSchema& schema = registry.get(name);
  const std::string text = read_file(path);
  const auto first_nl = text.find('\n');
  const auto first_line =
      trim(std::string_view(text).substr(0, first_nl));
  const auto header = split_fields(first_line, ',');
  DatasetTable ds;
  if (!header.empty() && trim(header.back()) == "target") {
    ds = read_canonical_csv(name, text);
    // Canonical files store codes only; keep the columns marked categorical.
    for (const auto& c : schema.categorical) {
      const auto it =
          std::find(ds.feature_names.begin(), ds.feature_names.end(), c);
      if (it == ds.feature_names.end()) continue;
      std::vector<double> codes =
          ds.features.column(static_cast<std::size_t>(it - ds.feature_names.begin()));
      std::sort(codes.begin(), codes.end());
      codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
      auto& levels = ds.categorical_levels[c];
      for (double v : codes) levels.push_back(format_double(v));
    }
  } else if (schema.format == SourceFormat::kDelimited) {
    ds = parse_dataset(schema, text);
  } else {
    throw DataError(schema.name + ": " + path.string() +
                    " is not a canonical CSV; run 'fetch-data' to convert "
                    "the upstream file");
  }
  check_expected_shape(schema, ds);
  return ds;
}

RowSplit random_split_indices(std::size_t n, double test_fraction,
                              std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ArgumentError("random_split: test_fraction must be in (0, 1)");
  }
  const auto n_test = static_cast<std::size_t>(
      std::llround(test_fraction * static_cast<double>(n)));
  if (n_test < 1 || n_test >= n) {
    throw ArgumentError("random_split: split leaves an empty side");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "random_split"));
  shuffle(perm, rng);
  RowSplit split;
  split.test_idx.assign(perm.begin(), perm.begin() + n_test);
  split.train_idx.assign(perm.begin() + n_test, perm.end());
  std::sort(split.test_idx.begin(), split.test_idx.end());
  std::sort(split.train_idx.begin(), split.train_idx.end());
  return split;
}

std::pair<DatasetTable, DatasetTable> random_split(const DatasetTable& ds,
                                                   double test_fraction,
                                                   std::uint64_t seed) {
  const auto split = random_split_indices(ds.rows(), test_fraction, seed);
  return {ds.subset(split.train_idx), ds.subset(split.test_idx)};
}

std::vector<std::size_t> SplitTriple::sorted_order() const {
  std::vector<std::size_t> out;
  out.reserve(lower_idx.size() + train_idx.size() + upper_idx.size());
  out.insert(out.end(), lower_idx.begin(), lower_idx.end());
  out.insert(out.end(), train_idx.begin(), train_idx.end());
  out.insert(out.end(), upper_idx.begin(), upper_idx.end());
  return out;
}

SplitTriple sorted_three_way_split(const DatasetTable& ds,
                                   std::string_view feature) {
  const std::size_t j = ds.feature_index(feature);
  const std::size_t n = ds.rows();
  if (n < 3) throw ArgumentError("sorted_three_way_split: need >= 3 rows");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a,
                                                   std::size_t b) {
    return ds.features(a, j) < ds.features(b, j);
  });
  const std::size_t base = n / 3;
  const std::size_t rem = n % 3;
  const std::size_t n_lower = base + (rem > 0 ? 1 : 0);
  const std::size_t n_train = base + (rem > 1 ? 1 : 0);

  SplitTriple s;
  s.feature = std::string(feature);
  s.lower_idx.assign(order.begin(), order.begin() + n_lower);
  s.train_idx.assign(order.begin() + n_lower,
                     order.begin() + n_lower + n_train);
  s.upper_idx.assign(order.begin() + n_lower + n_train, order.end());
  s.constant_feature =
      ds.features(order.front(), j) == ds.features(order.back(), j);
  return s;
}

WindowPlan rolling_windows(std::size_t n_sorted, std::size_t window_size,
                           std::size_t stride) {
  if (window_size == 0 || stride == 0) {
    throw ArgumentError("rolling_windows: window and stride must be positive");
  }
  if (window_size > n_sorted) {
    throw ArgumentError("rolling_windows: window larger than the data (" +
                        std::to_string(window_size) + " > " +
                        std::to_string(n_sorted) + ")");
  }
  WindowPlan plan{window_size, stride, {}};
  for (std::size_t start = 0; start + window_size <= n_sorted;
       start += stride) {
    plan.window_ranges.push_back({start, start + window_size});
  }
  return plan;
}

DatasetTable shift_feature(const DatasetTable& ds, std::string_view feature,
                           double k) {
  const std::size_t j = ds.feature_index(feature);
  if (ds.rows() < 2) throw ArgumentError("shift_feature: need >= 2 rows");
  DatasetTable out = ds;
  if (k == 0.0) return out;
  const auto col = ds.features.column(j);
  const double sd = sample_std(col);
  if (sd == 0.0) {
    throw ArgumentError("shift_feature: '" + std::string(feature) +
                        "' has zero variance, shift would be zero");
  }
  const double amount = k * sd;
  for (std::size_t r = 0; r < out.rows(); ++r) out.features(r, j) += amount;
  return out;
}

}  // namespace bootmon
