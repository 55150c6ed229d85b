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

#ifndef BOOTMON_CLI_H_
#define BOOTMON_CLI_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bootmon/data.h"

namespace bootmon {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitInternal = 3;

struct RunConfig {
  std::string command;  // coverage-bench | monitor-bench | explain-drift | fetch-data
  std::vector<std::string> datasets;  // empty: the command's default set
  std::vector<std::string> models;
  std::vector<std::string> methods;
  std::vector<double> alphas;
  std::vector<std::string> features;  // monitor-bench sort features
  std::optional<std::size_t> bootstraps;  // default depends on the command
  std::size_t window = 50;
  std::size_t stride = 1;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::filesystem::path data_dir = "data";
  std::filesystem::path out_dir = "out";
  std::filesystem::path house_prices_csv;
  double k_std = 5.0;
  bool synthetic = false;  // fetch-data: write offline stand-ins
  bool quiet = false;
};

// Applies `key = value` lines (`#` comments, comma-separated lists) on top of
// `config`. Keys are the long flag names with or without dashes replaced by
// underscores. Throws ArgumentError on unknown keys or bad values.
void apply_config_text(std::string_view text, RunConfig& config);

// Loads a dataset by registry name: generated for house_synth, the user file
// for house_prices, otherwise `<data_dir>/<name>.csv` or the upstream file.
DatasetTable resolve_dataset(const std::string& name, const RunConfig& config);

// True when `<data_dir>/<name>.csv` was written by `fetch-data --synthetic`.
bool is_standin(const std::string& name, const std::filesystem::path& data_dir);

int run_cli(std::span<const std::string> args, std::ostream& out,
            std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace bootmon

#endif  // BOOTMON_CLI_H_
