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

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mvqa/dataset_pipeline.hpp"
#include "mvqa/evaluation.hpp"
#include "mvqa/training.hpp"

namespace mvqa {

// Version of the stage outputs (summaries, eval results); bumped on any
// incompatible change. Each stage checks its predecessor's summary.
inline constexpr int kPipelineSchemaVersion = 1;

std::string tool_version();

struct SyntheticCorpusConfig {
  std::size_t count = 20;  // scenes, or persons for the face task
  std::size_t shots = 3;   // face images per person
  int width = 160;
  int height = 120;
};

struct RunConfig {
  Task task = Task::kObject;
  std::uint64_t seed = 0;
  std::filesystem::path out = "runs/default";
  std::size_t jobs = 1;

  // Sources: a synthetic corpus, or explicit images (object/plate) or
  // person -> images (face).
  std::optional<SyntheticCorpusConfig> synthetic;
  std::vector<std::filesystem::path> images;
  std::map<std::string, std::vector<std::filesystem::path>> persons;

  std::vector<CodecSpec> codecs{jpeg_codec()};
  // Re-balance every non-reference codec's grid against the reference codec.
  bool calibrate = false;
  std::string calibration_reference = "jpeg";
  double calibration_bin_width = 1.0;

  std::string detector = "synthetic";
  std::string embedder = "synthetic";
  std::string recognizer = "synthetic";

  double conf_threshold = 0.7;
  std::size_t min_gap = 1;
  std::size_t plate_max_distance = 1;
  double plate_read_padding = 0.1;
  double train_fraction = 0.6;
  double val_fraction = 0.2;

  MatchOptions match;

  TrainConfig train;
  double crop_padding = 0.1;

  std::vector<std::string> plugins{"psnr", "ssim"};
  bool evaluate_model = true;
  std::string eval_target;  // defaults to train.target
  Pooling pooling = Pooling::kPerObject;
  // Split evaluated: "test", "val", "train" or "all".
  std::string eval_split = "test";
};

// Parses a JSON config. "${VAR}" in string values expands from the
// environment; MVQA_OUT overrides "out". Throws ConfigError.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& json_text);

struct StageSummary {
  std::string stage;
  std::map<std::string, double> counts;
  double seconds = 0.0;
};

// Stage outputs under cfg.out:
//   sources/                 synthetic source images
//   corpus/{task}/{source}/  compressed variants
//   sweep/manifest.jsonl     sources and variants
//   label/manifest.jsonl     GT, plate strings / face pairs, splits
//   targets/targets.jsonl
//   train/model.mvqa, train/final.mvqa, train/log.csv, train/checkpoints/
//   eval/results.json
//   report/report.csv, report/report.json, report/srcc.svg
// and {stage}/summary.json for each.
StageSummary run_sweep(const RunConfig& cfg);
StageSummary run_label(const RunConfig& cfg);
StageSummary run_targets(const RunConfig& cfg);
StageSummary run_train(const RunConfig& cfg);
StageSummary run_eval(const RunConfig& cfg);
StageSummary run_report(const RunConfig& cfg);
std::vector<StageSummary> run_all(const RunConfig& cfg);

StageSummary run_stage(const std::string& name, const RunConfig& cfg);

// Evaluation results file (between eval and report).
std::string reports_to_json(std::span<const CorrelationReport> reports);
std::vector<CorrelationReport> reports_from_json(const std::string& text);

}  // namespace mvqa
