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

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "mvqa/errors.hpp"
#include "mvqa/io_util.hpp"
#include "mvqa/pipeline.hpp"
#include "tmpdir.hpp"

using namespace mvqa;
namespace fs = std::filesystem;

namespace {

nlohmann::json small_run(const fs::path& out) {
  auto j = nlohmann::json::parse(R"({
    "task": "object",
    "seed": 11,
    "corpus": {"synthetic": {"count": 3, "width": 96, "height": 72}},
    "codecs": [{"name": "jpeg", "grid": [10, 30, 50, 70, 90]}],
    "label": {"fractions": [0.34, 0.33]},
    "train": {"target": "delta_object_iou", "epochs": 2, "batch_size": 4,
              "input_width": 16, "input_height": 16, "stage_channels": [4, 8],
              "checkpoint_every": 1},
    "eval": {"plugins": [], "split": "all"}
  })");
  j["out"] = out.string();
  return j;
}

RunConfig config_for(const fs::path& out) { return parse_run_config(small_run(out).dump()); }

std::string slurp(const fs::path& p) { return read_file_text(p); }

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(MVQA_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, RejectsUnknownKeys) {
  auto j = small_run("x");
  j["trian"] = nlohmann::json::object();
  EXPECT_THROW(parse_run_config(j.dump()), ConfigError);
  j = small_run("x");
  j["train"]["epoch"] = 3;
  EXPECT_THROW(parse_run_config(j.dump()), ConfigError);
  EXPECT_THROW(parse_run_config("{not json"), ConfigError);
  EXPECT_THROW(load_run_config("/nonexistent/run.json"), ConfigError);
}

TEST(Config, ExpandsEnvironment) {
  ::setenv("MVQA_TEST_ROOT", "/tmp/somewhere", 1);
  auto j = small_run("${MVQA_TEST_ROOT}/run");
  ::unsetenv("MVQA_OUT");
  EXPECT_EQ(parse_run_config(j.dump()).out, fs::path("/tmp/somewhere/run"));
  j["out"] = "${MVQA_TEST_UNSET_VARIABLE}/run";
  EXPECT_THROW(parse_run_config(j.dump()), ConfigError);
  ::setenv("MVQA_OUT", "/tmp/override", 1);
  EXPECT_EQ(parse_run_config(small_run("a").dump()).out, fs::path("/tmp/override"));
  ::unsetenv("MVQA_OUT");
}

TEST(Config, Defaults) {
  const auto cfg = parse_run_config(R"({"task": "plate", "corpus": {"synthetic": {}}})");
  EXPECT_EQ(cfg.task, Task::kPlate);
  EXPECT_EQ(cfg.codecs.size(), 1u);
  EXPECT_EQ(cfg.codecs[0].name, "jpeg");
  EXPECT_DOUBLE_EQ(cfg.train_fraction, 0.6);
  EXPECT_DOUBLE_EQ(cfg.val_fraction, 0.2);
  EXPECT_EQ(cfg.eval_split, "test");
  EXPECT_THROW(parse_run_config(R"({"task": "plate"})"), ConfigError);
}

TEST(Pipeline, SweepCountsAndCache) {
  ::unsetenv("MVQA_OUT");
  ScratchDir dir;
  const auto cfg = config_for(dir.path());
  const auto first = run_sweep(cfg);
  EXPECT_EQ(first.counts.at("sources"), 3);
  EXPECT_EQ(first.counts.at("variants"), 15);
  EXPECT_EQ(first.counts.at("encoded"), 15);
  const auto manifest = slurp(dir / "sweep/manifest.jsonl");
  const auto second = run_sweep(cfg);
  EXPECT_EQ(second.counts.at("encoded"), 0);
  EXPECT_EQ(second.counts.at("reused"), 15);
  EXPECT_EQ(slurp(dir / "sweep/manifest.jsonl"), manifest);
}

TEST(Pipeline, StagesAreIsolatedAndReproducible) {
  ::unsetenv("MVQA_OUT");
  ScratchDir dir;
  const auto cfg = config_for(dir.path());
  run_all(cfg);
  for (const char* f : {"label/manifest.jsonl", "targets/targets.jsonl", "train/model.mvqa",
                        "train/final.mvqa", "train/log.csv", "eval/results.json",
                        "report/report.csv", "report/srcc.svg"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  // Zero plugins: only the model row.
  const auto csv = slurp(dir / "report/report.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
  EXPECT_NE(csv.find("model:delta_object_iou"), std::string::npos);

  const auto targets = slurp(dir / "targets/targets.jsonl");
  fs::remove_all(dir / "targets");
  EXPECT_THROW(run_train(cfg), Error);
  run_targets(cfg);
  EXPECT_EQ(slurp(dir / "targets/targets.jsonl"), targets);

  const auto model = slurp(dir / "train/model.mvqa");
  fs::remove_all(dir / "train");
  run_train(cfg);
  EXPECT_EQ(slurp(dir / "train/model.mvqa"), model);
  run_eval(cfg);
  run_report(cfg);
  EXPECT_EQ(slurp(dir / "report/report.csv"), csv);
}

TEST(Pipeline, SchemaMismatchNamesBothVersions) {
  ::unsetenv("MVQA_OUT");
  ScratchDir dir;
  const auto cfg = config_for(dir.path());
  run_sweep(cfg);
  auto summary = nlohmann::json::parse(slurp(dir / "sweep/summary.json"));
  summary["schema_version"] = 99;
  std::ofstream(dir / "sweep/summary.json") << summary.dump();
  try {
    run_label(cfg);
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("99"), std::string::npos) << msg;
    EXPECT_NE(msg.find(std::to_string(kPipelineSchemaVersion)), std::string::npos) << msg;
  }
  auto other = cfg;
  other.task = Task::kPlate;
  run_sweep(cfg);
  EXPECT_THROW(run_label(other), SchemaError);
}

TEST(Cli, BadConfigPathExitsTwo) {
  ScratchDir dir;
  EXPECT_EQ(run_cli("sweep --config /nonexistent/run.json", dir / "log"), 2);
  EXPECT_NE(slurp(dir / "log").find("config error"), std::string::npos);
  EXPECT_EQ(run_cli("frobnicate", dir / "log"), 2);
  EXPECT_EQ(run_cli("sweep", dir / "log"), 2);
}

TEST(Cli, MissingBackendLeavesNoPartialOutput) {
  ::unsetenv("MVQA_OUT");
  ScratchDir dir;
  const auto out = dir / "run";
  auto j = small_run(out);
  std::ofstream(dir / "good.json") << j.dump();
  ASSERT_EQ(run_cli("sweep -q -c " + (dir / "good.json").string(), dir / "log"), 0) << slurp(dir / "log");
  ASSERT_EQ(run_cli("label -q -c " + (dir / "good.json").string(), dir / "log"), 0) << slurp(dir / "log");
  j["backends"] = {{"detector", "no-such-detector"}};
  std::ofstream(dir / "bad.json") << j.dump();
  EXPECT_NE(run_cli("targets -c " + (dir / "bad.json").string(), dir / "log"), 0);
  EXPECT_NE(slurp(dir / "log").find("no-such-detector"), std::string::npos) << slurp(dir / "log");
  EXPECT_FALSE(fs::exists(out / "targets/targets.jsonl"));
  EXPECT_FALSE(fs::exists(out / "targets/summary.json"));
}
