// Copyright 2026 The mvqa Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// mvqa: runs the quality-assessment pipeline stages from a JSON config.
//
//   mvqa all --config configs/synthetic_object.json
//   mvqa train --config run.json --seed 7 --out runs/seed7
//
// Exit codes: 0 success, 1 stage failure, 2 config or usage error.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <utility>

#include <CLI11.hpp>

#include "mvqa/errors.hpp"
#include "mvqa/log.hpp"
#include "mvqa/pipeline.hpp"

namespace {

void print_summary(const mvqa::StageSummary& s) {
  std::printf("%-8s %8.2fs", s.stage.c_str(), s.seconds);
  for (const auto& [k, v] : s.counts) {
    if (v == std::floor(v) && std::abs(v) < 1e15) {
      std::printf("  %s=%lld", k.c_str(), static_cast<long long>(v));
    } else {
      std::printf("  %s=%.4g", k.c_str(), v);
    }
  }
  std::printf("\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Task-oriented image quality assessment pipeline"};
  app.set_version_flag("--version", mvqa::tool_version());
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::string> out;
  bool quiet = false;

  const std::pair<const char*, const char*> commands[] = {
      {"sweep", "encode every source at every codec quality"},
      {"label", "auto-label sources and assign splits"},
      {"targets", "compute task target scores per variant"},
      {"train", "train the task's quality model"},
      {"eval", "correlate metrics and the model with the targets"},
      {"report", "write report.csv, report.json and srcc.svg"},
      {"all", "run every stage in order"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_path, "JSON run config")->required();
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("-j,--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("-o,--out", out, "override the output root");
    sub->add_flag("-q,--quiet", quiet, "only print warnings and errors");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (quiet) {
    mvqa::log::set_sink([](mvqa::log::Level level, const std::string& msg) {
      if (level >= mvqa::log::Level::kWarning) std::clog << msg << '\n';
    });
  }

  const std::string command = app.get_subcommands().front()->get_name();
  mvqa::RunConfig cfg;
  try {
    cfg = mvqa::load_run_config(config_path);
    if (seed) {
      cfg.seed = *seed;
      cfg.train.seed = *seed;
      cfg.train.model.seed = *seed;
    }
    if (jobs) cfg.jobs = *jobs;
    if (out) cfg.out = *out;
  } catch (const mvqa::Error& e) {
    std::cerr << "mvqa: config error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (command == "all") {
      for (const auto& s : mvqa::run_all(cfg)) print_summary(s);
    } else {
      print_summary(mvqa::run_stage(command, cfg));
    }
  } catch (const mvqa::ConfigError& e) {
    std::cerr << "mvqa " << command << ": config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "mvqa " << command << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
