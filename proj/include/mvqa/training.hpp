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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvqa/dataset_pipeline.hpp"
#include "mvqa/detection_targets.hpp"
#include "mvqa/manifest.hpp"
#include "mvqa/quality_models.hpp"
#include "mvqa/vision_backends.hpp"

namespace mvqa {

// ---------------------------------------------------------------------------
// Splits

// Assigns "train" / "val" / "test" per source (every record of a source gets
// the same label). Counts are round(fraction * n_sources); the remainder goes
// to "test". Throws InvalidArgument when the fractions are negative or sum
// above 1, or when a split with a positive fraction would be empty.
Manifest make_splits(Manifest manifest, double train_fraction, double val_fraction,
                     std::uint64_t seed);

// ---------------------------------------------------------------------------
// Target scores

inline constexpr int kTargetSchemaVersion = 1;

struct TargetRecord {
  std::string frame_id;
  // Object, plate or pair index within the frame; nullopt for frame-level targets.
  std::optional<std::size_t> object_id;
  std::string codec;
  double quality_factor = 0.0;
  std::string target_name;
  double value = 0.0;

  friend bool operator==(const TargetRecord&, const TargetRecord&) = default;
};

// Target names per task:
//   object: delta_object_iou, object_iou, mean_iou
//   plate:  jaro, delta_object_iou
//   face:   face_delta
const std::vector<std::string>& target_names(Task task);
bool target_compatible(Task task, const std::string& target_name);

std::string targets_to_jsonl(std::span<const TargetRecord> records);
std::vector<TargetRecord> targets_from_jsonl(std::string_view text);
void write_targets(std::span<const TargetRecord> records, const std::filesystem::path& path);
std::vector<TargetRecord> read_targets(const std::filesystem::path& path);

struct Backends {
  const DetectorBackend* detector = nullptr;
  const FaceEmbedder* embedder = nullptr;
  const PlateRecognizer* recognizer = nullptr;
};

struct TargetOptions {
  MatchOptions match;
  // Padding of the GT box read by the plate recognizer.
  double plate_read_padding = 0.1;
  std::filesystem::path base_dir;
  FrameLoader loader = load_frame;
  std::size_t jobs = 1;
};

struct TargetStats {
  std::size_t records = 0;
  std::size_t skipped = 0;
  // Backend calls on source (reference) images.
  std::size_t reference_calls = 0;
};

// One record per (object | plate | pair) x variant x target name. The
// reference side of each source frame is run through the backend exactly once.
// Backend failures are logged and the affected records skipped. Records come
// out in manifest order regardless of `jobs`.
std::vector<TargetRecord> compute_targets(const Manifest& manifest, const Backends& backends,
                                          const TargetOptions& options = {},
                                          TargetStats* stats = nullptr);

// ---------------------------------------------------------------------------
// Training

// One training example. Detection: one (ref, comp) pair. Face: up to
// subset_size pairs. Plate: `pairs[0].second` is the compressed crop.
struct Sample {
  std::vector<TensorPair> pairs;
  double target = 0.0;
  std::string source_id;
  std::string split;
};

struct TrainConfig {
  Task task = Task::kObject;
  std::string target = "delta_object_iou";
  std::string loss = "mse";
  double learning_rate = 1e-3;
  // "constant" or "cosine" (annealed to 0 over the run).
  std::string schedule = "constant";
  std::size_t batch_size = 16;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
  ModelConfig model = default_model_config(ModelKind::kDetection);
  // Where per-epoch model files go; nothing is written when empty.
  std::filesystem::path checkpoint_dir;
  // Keep the weight blob of every n-th epoch in memory and on disk; the
  // initial and final epochs are always kept, the best one in memory only.
  std::size_t checkpoint_every = 1;
  // Optional model file to start from instead of a fresh initialisation. Its
  // architecture must match `model` (the seed aside).
  std::filesystem::path init_weights;
};

// Throws ConfigError when the target or model kind does not fit the task.
void validate(const TrainConfig& cfg);
ModelKind model_kind_for(Task task);

struct Checkpoint {
  std::size_t epoch = 0;
  std::vector<std::uint8_t> model_blob;  // may be empty for thinned epochs
  double train_loss = 0.0;
  std::optional<double> val_loss;
  std::optional<double> val_srcc;
  std::optional<double> train_srcc;
};

struct TrainResult {
  std::vector<Checkpoint> checkpoints;  // epoch 0 (initialisation) .. epochs
  // Index into checkpoints of the best validation SRCC (final epoch without val data).
  std::size_t best = 0;
};

// Mean squared error over the batch; gradients (of the mean) are accumulated
// into the model's parameter blocks after zeroing them.
double loss_and_gradients(QualityModel& model, std::span<const Sample> batch);
// Loss without touching gradients.
double evaluate_loss(const QualityModel& model, std::span<const Sample> samples);
double predict_sample(const QualityModel& model, const Sample& sample);
std::vector<double> predict_samples(const QualityModel& model, std::span<const Sample> samples);

// Trains on samples with split "train"; "val" samples drive model selection.
// Throws TrainingDiverged when the loss stops being finite.
TrainResult train_model(const TrainConfig& cfg, std::span<const Sample> samples);

// Builds samples from the manifest, crops and target file. Face samples group
// pairs of one (codec, qf) into subsets of subset_size persons (seeded order)
// with the mean face delta as target.
std::vector<Sample> build_samples(const Manifest& manifest, std::span<const TargetRecord> targets,
                                  const TrainConfig& cfg, double crop_padding = 0.1,
                                  const std::filesystem::path& base_dir = {},
                                  const FrameLoader& loader = load_frame);

// Aborts (throws Error) when a sample outside the "train" split is handed to
// the training loop.
void assert_train_split(std::span<const Sample> batch);

// Writes epoch,train_loss,val_loss,val_srcc,train_srcc.
std::string training_log_csv(const TrainResult& result);

// ---------------------------------------------------------------------------
// Shipped toy recipes: small synthetic corpora built in memory and trained at
// reduced input resolution so each run finishes in minutes on one CPU core.

struct ToyRecipe {
  TrainConfig train;
  std::size_t sample_count = 200;
};

ToyRecipe toy_recipe(Task task);
std::vector<Sample> toy_samples(const ToyRecipe& recipe);

}  // namespace mvqa
