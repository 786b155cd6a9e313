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

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvqa/correlation.hpp"
#include "mvqa/dataset_pipeline.hpp"
#include "mvqa/image.hpp"
#include "mvqa/manifest.hpp"
#include "mvqa/quality_models.hpp"
#include "mvqa/training.hpp"

namespace mvqa {

// One compressed item with its reference and target score.
struct EvalItem {
  std::string frame_id;
  std::optional<std::size_t> object_id;
  std::string codec;
  double quality_factor = 0.0;
  double target = 0.0;
  Image reference;
  Image distorted;
};

class MetricPlugin {
 public:
  virtual ~MetricPlugin() = default;
  virtual std::string name() const = 0;
  virtual bool full_reference() const = 0;
  virtual bool higher_is_better() const = 0;
  // One finite real per item.
  virtual double score(const EvalItem& item) const = 0;
};

// 10 log10(255^2 / MSE) with the 100 dB cap.
double baseline_psnr(const Image& ref, const Image& dist);

// Mean SSIM of the luma planes over all valid 11x11 Gaussian windows
// (sigma 1.5, K1 = 0.01, K2 = 0.03, L = 255). Crops smaller than the window
// use the largest odd window that fits, with sigma scaled to match.
double baseline_ssim(const Image& ref, const Image& dist);

class PsnrMetric final : public MetricPlugin {
 public:
  std::string name() const override { return "psnr"; }
  bool full_reference() const override { return true; }
  bool higher_is_better() const override { return true; }
  double score(const EvalItem& item) const override;
};

class SsimMetric final : public MetricPlugin {
 public:
  std::string name() const override { return "ssim"; }
  bool full_reference() const override { return true; }
  bool higher_is_better() const override { return true; }
  double score(const EvalItem& item) const override;
};

// A trained quality model used as a metric. Detection and face models predict
// degradation (higher is worse); the plate model predicts recognition quality.
class ModelMetric final : public MetricPlugin {
 public:
  ModelMetric(std::string name, std::shared_ptr<const QualityModel> model);
  std::string name() const override { return name_; }
  bool full_reference() const override;
  bool higher_is_better() const override;
  double score(const EvalItem& item) const override;

 private:
  std::string name_;
  std::shared_ptr<const QualityModel> model_;
};

// Builtin plugins by name: "psnr", "ssim".
std::unique_ptr<MetricPlugin> make_metric(const std::string& name);

enum class Pooling {
  // Every (object, variant) item is one sample.
  kPerObject,
  // Scores and targets are averaged over the objects of each frame variant.
  kPerImage,
};

struct EvalOptions {
  std::string task;
  // Orientation of the target: deltas are higher-is-worse, Jaro higher-is-better.
  bool target_higher_is_better = false;
  Pooling pooling = Pooling::kPerObject;
  std::size_t jobs = 1;
};

// Whether larger values of this target mean better quality.
bool target_higher_is_better(const std::string& target_name);

struct CorrelationReport {
  std::string metric;
  std::string task;
  std::size_t n = 0;
  std::optional<double> srcc;
  std::optional<double> plcc;
  std::map<std::string, std::optional<double>> codec_srcc;
  // Orientation-aligned (score, target) samples; both higher-is-better.
  std::vector<std::pair<double, double>> series;
  std::string diagnostic;
};

// Correlates orientation-aligned plugin scores with aligned targets. Fewer
// than 3 samples (or a constant series) give an undefined report.
CorrelationReport evaluate_metric(const MetricPlugin& plugin, std::span<const EvalItem> items,
                                  const EvalOptions& options);

// Items for `target_name`: object/plate crops (GT box plus padding) for
// per-object targets, whole frames for frame-level ones, whole images for faces.
std::vector<EvalItem> build_eval_items(const Manifest& manifest,
                                       std::span<const TargetRecord> targets,
                                       const std::string& target_name, double crop_padding = 0.1,
                                       const std::filesystem::path& base_dir = {},
                                       const FrameLoader& loader = load_frame);

// Report rows sorted by descending SRCC (undefined last, then by name).
std::vector<CorrelationReport> sorted_reports(std::vector<CorrelationReport> reports);

// CSV columns metric,task,n,srcc,plcc,codec_breakdown_json.
std::string report_csv(std::span<const CorrelationReport> reports);
std::string report_json(std::span<const CorrelationReport> reports);
// Horizontal bar chart of SRCC and PLCC per metric.
std::string report_svg(std::span<const CorrelationReport> reports);

// Writes report.csv, report.json and srcc.svg under out_dir; returns the paths.
std::vector<std::filesystem::path> make_report(std::span<const CorrelationReport> reports,
                                               const std::filesystem::path& out_dir);

}  // namespace mvqa
