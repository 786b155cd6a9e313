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
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mvqa/image.hpp"
#include "mvqa/nn.hpp"

namespace mvqa {

enum class ModelKind { kDetection, kFace, kPlate };

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

inline constexpr int kModelSchemaVersion = 1;

struct ModelConfig {
  ModelKind kind = ModelKind::kDetection;
  // Free-form task tag recorded in the model file (object, face, plate, general, ...).
  std::string task = "object";
  int input_width = 224;
  int input_height = 224;
  nn::BackboneConfig backbone;
  // Hidden width of the MLP head (detection and plate models).
  int hidden = 32;
  // Face model: pairs averaged per forward pass.
  int subset_size = 8;
  std::uint64_t seed = 0;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Detection 224x224 RGB, face 112x112 RGB with residual stages, plate 94x24 gray.
ModelConfig default_model_config(ModelKind kind);

// Resize (bilinear) and channel-convert to the configured input format.
Image prepare_image(const ModelConfig& cfg, const Image& img);
nn::Tensor prepare_input(const ModelConfig& cfg, const Image& img);

class QualityModel {
 public:
  explicit QualityModel(ModelConfig cfg) : cfg_(std::move(cfg)) {}
  virtual ~QualityModel() = default;
  QualityModel(const QualityModel&) = delete;
  QualityModel& operator=(const QualityModel&) = delete;

  const ModelConfig& config() const noexcept { return cfg_; }
  ModelKind kind() const noexcept { return cfg_.kind; }

  // Parameter blocks in a fixed order (serialization order).
  virtual std::vector<nn::ParamBlock> parameters() = 0;
  void zero_grad();

  Image prepare(const Image& img) const { return prepare_image(cfg_, img); }
  nn::Tensor prepare_tensor(const Image& img) const { return prepare_input(cfg_, img); }

 protected:
  void check_input(const nn::Tensor& t) const;

 private:
  ModelConfig cfg_;
};

// Shared backbone over (reference, compressed) crops; the head sees
// [f_ref, f_comp, f_ref - f_comp]. Output is an unbounded real (Delta Object IoU).
class DetectionQualityModel final : public QualityModel {
 public:
  explicit DetectionQualityModel(ModelConfig cfg);

  struct Pass {
    nn::Backbone::Trace ref_trace;
    nn::Backbone::Trace comp_trace;
    nn::Vector concat;  // 3 x feature length
    nn::Vector hidden_pre;
    double output = 0.0;
  };

  Pass forward(const nn::Tensor& ref, const nn::Tensor& comp, bool keep_trace = false) const;
  void backward(const Pass& pass, double d_output);

  double predict(const nn::Tensor& ref, const nn::Tensor& comp) const;
  // Errors when the crops differ in size or channels from each other.
  double predict(const Image& ref_crop, const Image& compressed_crop) const;

  std::vector<nn::ParamBlock> parameters() override;
  int feature_size() const noexcept { return backbone_.feature_size(); }

 private:
  nn::Backbone backbone_;
  nn::Linear fc1_;
  nn::Linear fc2_;
};

using TensorPair = std::pair<nn::Tensor, nn::Tensor>;

// Per-pair features [f_ref, f_comp, f_ref - f_comp] are averaged over the subset
// (summed in lexicographic feature order, so input order never matters), then
// a single linear layer regresses the score.
class FaceQualityModel final : public QualityModel {
 public:
  explicit FaceQualityModel(ModelConfig cfg);

  struct Pass {
    std::vector<nn::Backbone::Trace> ref_traces;
    std::vector<nn::Backbone::Trace> comp_traces;
    nn::Vector mean_feature;
    double output = 0.0;
  };

  // 1 <= pairs.size() <= subset_size.
  Pass forward(std::span<const TensorPair> pairs, bool keep_trace = false) const;
  void backward(const Pass& pass, double d_output);

  // Any non-empty set; sets larger than subset_size are split into chunks (in
  // canonical order) whose predictions are averaged.
  double predict(std::span<const TensorPair> pairs) const;
  double predict(std::span<const std::pair<Image, Image>> pairs) const;

  std::vector<nn::ParamBlock> parameters() override;

 private:
  nn::Vector pair_feature(const nn::Tensor& ref, const nn::Tensor& comp,
                          nn::Backbone::Trace* ref_trace, nn::Backbone::Trace* comp_trace) const;
  nn::Backbone backbone_;
  nn::Linear head_;
};

// Single grayscale crop -> CNN -> MLP -> logistic; output in [0, 1].
class PlateQualityModel final : public QualityModel {
 public:
  explicit PlateQualityModel(ModelConfig cfg);

  struct Pass {
    nn::Backbone::Trace trace;
    nn::Vector feature;
    nn::Vector hidden_pre;
    double output = 0.0;
  };

  Pass forward(const nn::Tensor& crop, bool keep_trace = false) const;
  void backward(const Pass& pass, double d_output);

  double predict(const nn::Tensor& crop) const;
  double predict(const Image& compressed_crop) const;

  std::vector<nn::ParamBlock> parameters() override;

 private:
  nn::Backbone backbone_;
  nn::Linear fc1_;
  nn::Linear fc2_;
};

std::unique_ptr<QualityModel> make_model(const ModelConfig& cfg);

// Self-describing container: magic, JSON header (config, task, resolution,
// schema version, parameter count), raw little-endian float64 weights.
std::vector<std::uint8_t> serialize_model(QualityModel& model);
std::unique_ptr<QualityModel> deserialize_model(std::span<const std::uint8_t> bytes);
void save_model(QualityModel& model, const std::filesystem::path& path);
std::unique_ptr<QualityModel> load_model(const std::filesystem::path& path);

// Typed loaders. Throw SchemaError when the file holds a different model kind
// or, when `expected` is given, a different input resolution / architecture.
std::unique_ptr<DetectionQualityModel> load_detection_model(const std::filesystem::path& path,
                                                            const ModelConfig* expected = nullptr);
std::unique_ptr<FaceQualityModel> load_face_model(const std::filesystem::path& path,
                                                  const ModelConfig* expected = nullptr);
std::unique_ptr<PlateQualityModel> load_plate_model(const std::filesystem::path& path,
                                                    const ModelConfig* expected = nullptr);

}  // namespace mvqa
