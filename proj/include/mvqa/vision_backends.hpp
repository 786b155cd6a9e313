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

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mvqa/core_types.hpp"
#include "mvqa/image.hpp"

namespace mvqa {

enum class Task { kObject, kFace, kPlate };

std::string to_string(Task t);
Task task_from_string(const std::string& s);

class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;
  virtual std::string name() const = 0;
  virtual Task task() const = 0;
  // Boxes are clipped to the image. Deterministic for fixed weights and input.
  virtual std::vector<Detection> detect(const Image& image) const = 0;
  virtual bool thread_safe() const { return true; }

  std::vector<Detection> detect(const ImageRef& ref) const;
  std::vector<std::vector<Detection>> detect_batch(const std::vector<Image>& images) const;
};

class FaceEmbedder {
 public:
  virtual ~FaceEmbedder() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dimension() const = 0;
  // Throws InvalidEmbedding when no face can be embedded (zero vector).
  virtual EmbeddingVector embed(const Image& image) const = 0;
  virtual bool thread_safe() const { return true; }
};

class PlateRecognizer {
 public:
  virtual ~PlateRecognizer() = default;
  virtual std::string name() const = 0;
  virtual const PlateAlphabet& alphabet() const = 0;
  virtual PlateString recognize(const Image& image) const = 0;
  virtual bool thread_safe() const { return true; }
};

// ---------------------------------------------------------------------------
// Synthetic oracle backends. Behaviour is fully specified here so end-to-end
// runs are reproducible without model weights.

// Detects regions that differ from the background (median luma) by at least
// `contrast_threshold`: 4-connected components with at least `min_area`
// pixels. For a component with mean absolute deviation s and standard
// deviation n of that deviation, confidence = s^2 / (s^2 + kappa * n^2), so a
// flat region scores exactly 1 and noise or texture loss lowers it. Components
// whose box lies inside a larger component's box are dropped.
class SyntheticDetector final : public DetectorBackend {
 public:
  struct Params {
    double contrast_threshold = 40.0;
    int min_area = 16;
    double kappa = 4.0;
    int class_id = 0;
  };

  explicit SyntheticDetector(Task task = Task::kObject) : SyntheticDetector(task, Params{}) {}
  SyntheticDetector(Task task, Params p) : task_(task), p_(p) {}

  std::string name() const override { return "synthetic-contrast"; }
  Task task() const override { return task_; }
  using DetectorBackend::detect;
  std::vector<Detection> detect(const Image& image) const override;
  const Params& params() const noexcept { return p_; }

 private:
  Task task_;
  Params p_;
};

// Luma pooled on a grid x grid cell partition, centred (pooled mean removed),
// then multiplied by a fixed seeded Gaussian projection with zero bias.
// A zero pooled vector (blank or constant image) is rejected as "no face".
class SyntheticEmbedder final : public FaceEmbedder {
 public:
  explicit SyntheticEmbedder(std::size_t dimension = 64, int grid = 16,
                             std::uint64_t seed = 0x5eedULL);

  std::string name() const override { return "synthetic-projection"; }
  std::size_t dimension() const override { return static_cast<std::size_t>(projection_.rows()); }
  EmbeddingVector embed(const Image& image) const override;

  // Pooled, centred luma vector the projection is applied to.
  Eigen::VectorXd pooled(const Image& image) const;
  const Eigen::MatrixXd& projection() const noexcept { return projection_; }
  int grid() const noexcept { return grid_; }

 private:
  int grid_;
  Eigen::MatrixXd projection_;
};

// Reads plates drawn with the built-in 5x7 bitmap font (see render_plate).
// The plate is the largest bright component of the crop; its height fixes the
// glyph scale and its width the glyph count. Each glyph cell is sampled to a
// 5x7 bit pattern and matched to the closest template; a glyph whose best
// match differs in more than `legibility_bits` bits is unreadable and dropped.
// Confidence is the mean over glyph slots of (1 - bit errors / 35), with 0 for
// dropped slots. Crops without contrast read as ("", 0).
class SyntheticPlateRecognizer final : public PlateRecognizer {
 public:
  explicit SyntheticPlateRecognizer(int legibility_bits = 3, PlateAlphabet alphabet = {});

  std::string name() const override { return "synthetic-template"; }
  const PlateAlphabet& alphabet() const override { return alphabet_; }
  PlateString recognize(const Image& image) const override;

 private:
  int legibility_bits_;
  PlateAlphabet alphabet_;
};

// 5x7 glyph bitmap: row-major, bit (row * 5 + col) set where ink is.
std::uint64_t glyph_bits(char c);
// Characters with a built-in glyph (A-Z, 0-9).
const std::string& font_characters();

// Backends by name: "synthetic" is the only built-in implementation.
std::unique_ptr<DetectorBackend> make_detector(const std::string& name, Task task);
std::unique_ptr<FaceEmbedder> make_embedder(const std::string& name);
std::unique_ptr<PlateRecognizer> make_recognizer(const std::string& name);

}  // namespace mvqa
