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

#include "bootmon/cli.h"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

#include "bootmon/error.h"
#include "bootmon/explain.h"
#include "bootmon/intervals.h"
#include "bootmon/models.h"
#include "bootmon/monitor.h"
#include "bootmon/stats.h"
#include "bootmon/synthetic.h"

namespace bootmon {
namespace {

namespace fs = std::filesystem;

constexpr std::string_view kStandinSuffix = ".synthetic";

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  while (!s.empty()) {
    const auto comma = s.find(',');
    const auto item = trim(s.substr(0, comma));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T v{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ArgumentError("config: bad value '" + std::string(value) +
                        "' for " + std::string(key));
  }
  return v;
}

std::vector<double> parse_alphas(std::string_view key,
                                 const std::vector<std::string>& items) {
  std::vector<double> out;
  for (const auto& a : items) out.push_back(parse_number<double>(key, a));
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
  if (!f) throw DataError("cannot write " + path.string());
}

std::string shell_quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) {
    if (c == '\'') {
      q += "'\\''";
    } else {
      q += c;
    }
  }
  return q + "'";
}

void run_shell(const std::string& command, const std::string& what) {
  if (std::system(command.c_str()) != 0) {
    throw DataError(what + " failed: " + command);
  }
}

std::vector<std::string> default_datasets(const RunConfig& cfg,
                                          std::string_view fallback_group) {
  if (!cfg.datasets.empty()) return cfg.datasets;
  return DatasetRegistry::builtin().group(fallback_group);
}

std::vector<EstimatorSpec> model_specs(const RunConfig& cfg,
                                       std::vector<ModelKind> fallback) {
  std::vector<EstimatorSpec> specs;
  if (cfg.models.empty()) {
    for (ModelKind k : fallback) specs.push_back(EstimatorSpec::defaults(k));
  } else {
    for (const auto& m : cfg.models) {
      specs.push_back(EstimatorSpec::defaults(parse_model_kind(m)));
    }
  }
  return specs;
}

class Logger {
 public:
  Logger(std::ostream& err, bool quiet) : err_(err), quiet_(quiet) {}
  void operator()(const std::string& message) const {
    if (!quiet_) err_ << "[bootmon] " << message << '\n' << std::flush;
  }

 private:
  std::ostream& err_;
  bool quiet_;
};

std::vector<DatasetTable> load_all(const std::vector<std::string>& names,
                                   const RunConfig& cfg, const Logger& log) {
  std::vector<DatasetTable> out;
  for (const auto& n : names) {
    out.push_back(resolve_dataset(n, cfg));
    if (is_standin(n, cfg.data_dir)) {
      log(n + ": using the synthetic stand-in from fetch-data --synthetic");
    }
  }
  return out;
}

int cmd_coverage(const RunConfig& cfg, std::ostream& out, const Logger& log) {
  const auto datasets = load_all(default_datasets(cfg, "uci"), cfg, log);
  const auto specs = model_specs(
      cfg, {ModelKind::kOls, ModelKind::kCart, ModelKind::kGradientBoosting});
  CoverageOptions opt;
  if (!cfg.alphas.empty()) opt.alphas = cfg.alphas;
  if (!cfg.methods.empty()) {
    opt.methods.clear();
    for (const auto& m : cfg.methods) {
      opt.methods.push_back(parse_interval_method(m));
    }
  }
  opt.bootstraps = cfg.bootstraps.value_or(200);
  opt.seed = cfg.seed;
  opt.jobs = cfg.jobs;
  opt.log = log;
  const CoverageReport report = coverage_benchmark(datasets, specs, opt);
  write_text(cfg.out_dir / "coverage.csv", coverage_csv(report));
  write_text(cfg.out_dir / "table2.json", coverage_json(report));
  out << "model method mean_abs_dev std count\n";
  for (const auto& a : report.aggregates) {
    out << a.model << ' ' << a.method << ' ' << format_double(a.mean) << ' '
        << format_double(a.std) << ' ' << a.count << '\n';
  }
  return kExitOk;
}

int cmd_monitor(const RunConfig& cfg, std::ostream& out, const Logger& log) {
  const auto datasets = load_all(default_datasets(cfg, "uci"), cfg, log);
  const auto specs = model_specs(
      cfg, {ModelKind::kOls, ModelKind::kPoisson, ModelKind::kCart,
            ModelKind::kRandomForest, ModelKind::kGradientBoosting});
  MonitorOptions opt;
  if (!cfg.methods.empty()) {
    opt.methods.clear();
    for (const auto& m : cfg.methods) {
      opt.methods.push_back(parse_monitor_method(m));
    }
  }
  if (cfg.alphas.size() > 1) {
    throw ArgumentError("monitor-bench takes a single --alpha");
  }
  if (!cfg.alphas.empty()) opt.alpha = cfg.alphas[0];
  opt.window = cfg.window;
  opt.stride = cfg.stride;
  opt.bootstraps = cfg.bootstraps.value_or(50);
  opt.seed = cfg.seed;
  opt.jobs = cfg.jobs;
  opt.features = cfg.features;
  opt.log = log;
  std::vector<MonitorSeries> series;
  const ScoreReport report =
      run_monitor_benchmark(datasets, specs, opt, &series);
  const fs::path series_dir = cfg.out_dir / "series";
  fs::create_directories(series_dir);
  for (const auto& s : series) {
    write_text(series_dir / series_filename(s), series_csv(s));
  }
  write_text(cfg.out_dir / "scores.csv", scores_csv(report));
  write_text(cfg.out_dir / "cells.csv", cells_csv(report));
  write_text(cfg.out_dir / "table3.json", scores_json(report));
  for (const auto& s : report.skipped) log("skipped " + s);
  out << "model method mean_score std datasets\n";
  for (const auto& a : report.aggregates) {
    out << a.model << ' ' << a.method << ' ' << format_double(a.mean) << ' '
        << format_double(a.std) << ' ' << a.count << '\n';
  }
  return kExitOk;
}

int cmd_explain(const RunConfig& cfg, std::ostream& out, const Logger& log) {
  if (cfg.datasets.size() > 1) {
    throw ArgumentError("explain-drift takes a single --dataset");
  }
  const std::string name =
      cfg.datasets.empty() ? "house_synth" : cfg.datasets[0];
  const DatasetTable ds = resolve_dataset(name, cfg);
  AttributionOptions opt;
  if (cfg.models.size() > 1) {
    throw ArgumentError("explain-drift takes a single --model");
  }
  if (!cfg.models.empty()) {
    opt.model = EstimatorSpec::defaults(parse_model_kind(cfg.models[0]));
  }
  if (cfg.alphas.size() > 1) {
    throw ArgumentError("explain-drift takes a single --alpha");
  }
  if (!cfg.alphas.empty()) opt.alpha = cfg.alphas[0];
  opt.k_std = cfg.k_std;
  opt.bootstraps = cfg.bootstraps.value_or(200);
  opt.seed = cfg.seed;
  opt.jobs = cfg.jobs;
  opt.log = log;
  const AttributionReport r = run_drift_attribution(ds, opt);
  write_text(cfg.out_dir / "attribution.json", attribution_json(r));
  write_text(cfg.out_dir / "local_explanation.json", local_explanation_json(r));
  write_text(cfg.out_dir / "figure2.csv", figure2_csv(r));
  write_text(cfg.out_dir / "figure3.csv", figure3_csv(r));
  out << "surrogate_r2 " << format_double(r.surrogate_r2) << '\n'
      << "model_r2 " << format_double(r.model_r2) << '\n'
      << "feature shap_importance ks psi\n";
  for (const auto& f : r.features) {
    out << f.feature << ' ' << format_double(f.shap_importance) << ' '
        << format_double(f.ks) << ' ' << format_double(f.psi) << '\n';
  }
  return kExitOk;
}

// Turns a downloaded spreadsheet (possibly inside a zip) into a headed CSV
// with pandas, then parses it with the registry's column names.
DatasetTable convert_spreadsheet(const DatasetSchema& schema,
                                 const fs::path& source,
                                 const fs::path& tmp_csv) {
  std::string script =
      "import sys, io, zipfile, pandas as pd\n"
      "src, member, dst = sys.argv[1], sys.argv[2], sys.argv[3]\n"
      "data = open(src, 'rb').read()\n"
      "if member:\n"
      "    data = zipfile.ZipFile(io.BytesIO(data)).read(member)\n"
      "pd.read_excel(io.BytesIO(data)).to_csv(dst, index=False)\n";
  run_shell("python3 -c " + shell_quote(script) + ' ' +
                shell_quote(source.string()) + ' ' +
                shell_quote(schema.archive_member) + ' ' +
                shell_quote(tmp_csv.string()),
            "spreadsheet conversion (needs python3 with pandas)");
  DatasetSchema delimited = schema;
  delimited.format = SourceFormat::kDelimited;
  delimited.delimiter = ',';
  delimited.header = true;
  std::ifstream f(tmp_csv, std::ios::binary);
  std::stringstream text;
  text << f.rdbuf();
  return parse_dataset(delimited, text.str());
}

int cmd_fetch(const RunConfig& cfg, std::ostream& out, const Logger& log) {
  const auto& reg = DatasetRegistry::builtin();
  fs::create_directories(cfg.data_dir);
  for (const auto& name : default_datasets(cfg, "uci")) {
    const DatasetSchema& schema = reg.get(name);
    if (schema.format == SourceFormat::kGenerated || schema.url.empty()) {
      throw ArgumentError(name + " has no upstream download");
    }
    const fs::path canonical = cfg.data_dir / (name + ".csv");
    const fs::path marker = cfg.data_dir / (name + std::string(kStandinSuffix));
    if (cfg.synthetic) {
      write_canonical_csv(make_standin(schema, cfg.seed), canonical);
      write_text(marker,
                 "synthetic stand-in, not the upstream data; seed " +
                     std::to_string(cfg.seed) + "\n");
      out << name << " -> " << canonical.string() << " (synthetic)\n";
      continue;
    }
    const fs::path source = cfg.data_dir / schema.source_file;
    log("downloading " + schema.url);
    run_shell("curl -fsSL -o " + shell_quote(source.string()) + ' ' +
                  shell_quote(schema.url),
              "download of " + name);
    DatasetTable ds;
    if (schema.format == SourceFormat::kSpreadsheet) {
      ds = convert_spreadsheet(schema, source,
                               cfg.data_dir / (name + ".converted.csv"));
      fs::remove(cfg.data_dir / (name + ".converted.csv"));
    } else if (!schema.archive_member.empty()) {
      throw DataError(name + ": zipped delimited sources are not supported");
    } else {
      ds = load_dataset(name, source, reg);
    }
    write_canonical_csv(ds, canonical);
    fs::remove(marker);
    out << name << " -> " << canonical.string() << " (" << ds.rows()
        << " rows)\n";
  }
  return kExitOk;
}

struct ConfigKey {
  std::string_view name;
  void (*apply)(RunConfig&, std::string_view key, std::string_view value);
};

const ConfigKey kConfigKeys[] = {
    {"dataset",
     [](RunConfig& c, std::string_view, std::string_view v) {
       c.datasets = split_list(v);
     }},
    {"model",
     [](RunConfig& c, std::string_view, std::string_view v) {
       c.models = split_list(v);
     }},
    {"method",
     [](RunConfig& c, std::string_view, std::string_view v) {
       c.methods = split_list(v);
     }},
    {"feature",
     [](RunConfig& c, std::string_view, std::string_view v) {
       c.features = split_list(v);
     }},
    {"alpha",
     [](RunConfig& c, std::string_view k, std::string_view v) {
       c.alphas = parse_alphas(k, split_list(v));
     }},
    {"bootstraps",
     [](RunConfig& c, std::string_view k, std::string_view v) {
       c.bootstraps = parse_number<std::size_t>(k, v);
     }},
    {"window",
     [](RunConfig& c, std::string_view k, std::string_view v) {
       c.window = parse_number<std::size_t>(k, v);
     }},
    {"stride",
     [](RunConfig& c, std::string_view k, std::string_view v) {
       c.stride = parse_number<std::size_t>(k, v);
     }},
    {"seed",
     [](RunConfig& c, std::string_view k, std::string_view v) {
       c.seed = parse_number<std::uint64_t>(k, v);
     }},
    {"jobs",
     [](RunConfig& c, std::string_view k, std::string_view v) {
       c.jobs = parse_number<std::size_t>(k, v);
     }},
    {"data_dir",
     [](RunConfig& c, std::string_view, std::string_view v) {
       c.data_dir = std::string(v);
     }},
    {"out_dir",
     [](RunConfig& c, std::string_view, std::string_view v) {
       c.out_dir = std::string(v);
     }},
    {"house_prices_csv",
     [](RunConfig& c, std::string_view, std::string_view v) {
       c.house_prices_csv = std::string(v);
     }},
    {"k_std",
     [](RunConfig& c, std::string_view k, std::string_view v) {
       c.k_std = parse_number<double>(k, v);
     }},
};

void validate(const RunConfig& cfg) {
  if (cfg.jobs == 0) throw ArgumentError("--jobs must be at least 1");
  if (cfg.window == 0) throw ArgumentError("--window must be at least 1");
  if (cfg.stride == 0) throw ArgumentError("--stride must be at least 1");
  if (cfg.bootstraps && *cfg.bootstraps < 2) {
    throw ArgumentError("--bootstraps must be at least 2");
  }
  for (double a : cfg.alphas) {
    if (!(a > 0.0 && a < 1.0)) {
      throw ArgumentError("--alpha values must lie in (0, 1)");
    }
  }
}

}  // namespace

void apply_config_text(std::string_view text, RunConfig& config) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ArgumentError("config line " + std::to_string(line_no) +
                          ": expected key = value");
    }
    std::string key(trim(line.substr(0, eq)));
    std::replace(key.begin(), key.end(), '-', '_');
    const auto value = trim(line.substr(eq + 1));
    const auto it = std::find_if(std::begin(kConfigKeys), std::end(kConfigKeys),
                                 [&](const ConfigKey& k) { return k.name == key; });
    if (it == std::end(kConfigKeys)) {
      throw ArgumentError("config line " + std::to_string(line_no) +
                          ": unknown key '" + key + "'");
    }
    it->apply(config, key, value);
  }
}

bool is_standin(const std::string& name, const fs::path& data_dir) {
  return fs::exists(data_dir / (name + std::string(kStandinSuffix)));
}

DatasetTable resolve_dataset(const std::string& name, const RunConfig& cfg) {
  const auto& reg = DatasetRegistry::builtin();
  if (name == "house_synth") {
    return make_house_synth(reg.get(name).expected_rows.value_or(1460),
                            cfg.seed);
  }
  if (name == "house_prices") {
    if (cfg.house_prices_csv.empty()) {
      throw ArgumentError(
          "house_prices needs --house-prices-csv pointing at the Kaggle "
          "train.csv, which is not bundled; use --dataset house_synth for the "
          "bundled synthetic analogue");
    }
    return load_dataset(name, cfg.house_prices_csv, reg);
  }
  const DatasetSchema& schema = reg.get(name);
  const fs::path canonical = cfg.data_dir / (name + ".csv");
  if (fs::exists(canonical)) return load_dataset(name, canonical, reg);
  const fs::path upstream = cfg.data_dir / schema.source_file;
  if (!schema.source_file.empty() && fs::exists(upstream)) {
    return load_dataset(name, upstream, reg);
  }
  throw DataError("dataset '" + name + "' not found: expected " +
                  canonical.string() +
                  "; run 'bootmon fetch-data' (or 'fetch-data --synthetic' "
                  "for offline stand-ins)");
}

int run_cli(std::span<const std::string> args, std::ostream& out,
            std::ostream& err) {
  RunConfig cfg;
  cfg.jobs = std::max(1u, std::thread::hardware_concurrency());
  std::string dataset_list, model_list, method_list, alpha_list, feature_list;
  std::string config_path;
  std::size_t bootstraps = 0;

  CLI::App app{"Bootstrap prediction intervals, model monitoring and drift "
               "attribution benchmarks"};
  app.name("bootmon");
  app.fallthrough();
  app.require_subcommand(1);
  app.add_option("--dataset", dataset_list, "Comma-separated dataset names");
  app.add_option("--model", model_list,
                 "Comma-separated models: ols, poisson, cart, random_forest, "
                 "gradient_boosting");
  app.add_option("--method", method_list,
                 "Comma-separated methods (doubt, nasa | doubt, ks, psi)");
  app.add_option("--alpha", alpha_list, "Comma-separated interval levels");
  app.add_option("--feature", feature_list,
                 "Comma-separated sort features for monitor-bench");
  app.add_option("--bootstraps", bootstraps, "Bootstrap replicas B");
  app.add_option("--window", cfg.window, "Monitoring window size")
      ->capture_default_str();
  app.add_option("--stride", cfg.stride, "Monitoring window stride")
      ->capture_default_str();
  app.add_option("--seed", cfg.seed, "Master seed")->capture_default_str();
  app.add_option("--jobs", cfg.jobs, "Worker threads")->capture_default_str();
  app.add_option("--data-dir", cfg.data_dir, "Dataset directory")
      ->capture_default_str();
  app.add_option("--out-dir", cfg.out_dir, "Output directory")
      ->capture_default_str();
  app.add_option("--house-prices-csv", cfg.house_prices_csv,
                 "Kaggle House Prices train.csv");
  app.add_option("--k-std", cfg.k_std, "Shift size in standard deviations")
      ->capture_default_str();
  app.add_option("--config", config_path,
                 "key = value file whose entries override the flags");
  app.add_flag("--quiet", cfg.quiet, "No progress messages");

  app.add_subcommand("coverage-bench", "Interval coverage benchmark");
  app.add_subcommand("monitor-bench", "Rolling-window monitoring benchmark");
  app.add_subcommand("explain-drift", "Drift attribution with TreeSHAP");
  app.add_subcommand("fetch-data", "Download and convert the datasets")
      ->add_flag("--synthetic", cfg.synthetic,
                 "Write offline synthetic stand-ins instead");

  std::vector<const char*> argv;
  argv.push_back("bootmon");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    cfg.command = app.get_subcommands().front()->get_name();
    cfg.datasets = split_list(dataset_list);
    cfg.models = split_list(model_list);
    cfg.methods = split_list(method_list);
    cfg.features = split_list(feature_list);
    cfg.alphas = parse_alphas("--alpha", split_list(alpha_list));
    if (bootstraps != 0) cfg.bootstraps = bootstraps;
    if (!config_path.empty()) {
      std::ifstream f(config_path, std::ios::binary);
      if (!f) throw ArgumentError("cannot read config file " + config_path);
      std::stringstream text;
      text << f.rdbuf();
      apply_config_text(text.str(), cfg);
    }
    validate(cfg);
    const Logger log(err, cfg.quiet);
    if (cfg.command == "coverage-bench") return cmd_coverage(cfg, out, log);
    if (cfg.command == "monitor-bench") return cmd_monitor(cfg, out, log);
    if (cfg.command == "explain-drift") return cmd_explain(cfg, out, log);
    return cmd_fetch(cfg, out, log);
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace bootmon
