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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvqa/errors.hpp"

namespace mvqa {

// Axis-aligned box in continuous pixel coordinates, origin top-left.
// Half-open: covers [x_min, x_max) x [y_min, y_max).
class BoundingBox {
 public:
  BoundingBox(double x_min, double y_min, double x_max, double y_max);

  double x_min() const noexcept { return x_min_; }
  double y_min() const noexcept { return y_min_; }
  double x_max() const noexcept { return x_max_; }
  double y_max() const noexcept { return y_max_; }
  double width() const noexcept { return x_max_ - x_min_; }
  double height() const noexcept { return y_max_ - y_min_; }
  double area() const noexcept { return width() * height(); }

  BoundingBox translated(double dx, double dy) const {
    return {x_min_ + dx, y_min_ + dy, x_max_ + dx, y_max_ + dy};
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;

 private:
  double x_min_;
  double y_min_;
  double x_max_;
  double y_max_;
};

struct Detection {
  Detection(BoundingBox b, int cls, double conf);

  BoundingBox box;
  int class_id;
  double confidence;

  friend bool operator==(const Detection&, const Detection&) = default;
};

// Fixed-length face embedding. Finite entries only.
class EmbeddingVector {
 public:
  explicit EmbeddingVector(std::vector<double> values);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double norm() const noexcept;

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  std::vector<double> values_;
};

// Set of characters a plate string may contain.
class PlateAlphabet {
 public:
  // Latin uppercase + digits.
  PlateAlphabet();
  explicit PlateAlphabet(std::string chars);

  bool contains(char c) const noexcept;
  const std::string& chars() const noexcept { return chars_; }

  // Upper-cases and drops characters outside the alphabet.
  // `changed` is set when any transformation was applied.
  std::string normalize(std::string_view raw, bool* changed = nullptr) const;

 private:
  std::string chars_;
  bool member_[256] = {};
};

struct PlateString {
  PlateString() = default;
  PlateString(std::string c, double conf);

  std::string chars;
  double confidence = 0.0;

  friend bool operator==(const PlateString&, const PlateString&) = default;
};

enum class Colorspace : std::uint8_t { kGray, kRgb };

std::string_view to_string(Colorspace cs);

// Reference to an image on disk plus its declared geometry.
struct ImageRef {
  ImageRef(std::filesystem::path p, int w, int h, int depth = 8,
           Colorspace cs = Colorspace::kRgb);

  std::filesystem::path path;
  int width;
  int height;
  int bit_depth;
  Colorspace colorspace;

  friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

// area(a ∩ b) / area(a ∪ b); 0 when disjoint.
double iou(const BoundingBox& a, const BoundingBox& b) noexcept;

// dot(a,b) / (|a| |b|), clamped to [-1, 1]. Throws InvalidEmbedding on a
// zero vector or a length mismatch.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

}  // namespace mvqa
