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

#include "mvqa/core_types.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace mvqa {

BoundingBox::BoundingBox(double x_min, double y_min, double x_max, double y_max)
    : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max) {
  const bool finite = std::isfinite(x_min) && std::isfinite(y_min) &&
                      std::isfinite(x_max) && std::isfinite(y_max);
  if (!finite || x_min < 0.0 || y_min < 0.0 || !(x_min < x_max) || !(y_min < y_max)) {
    std::ostringstream os;
    os << "invalid bounding box (" << x_min << ", " << y_min << ", " << x_max << ", "
       << y_max << ")";
    throw InvalidArgument(os.str());
  }
}

Detection::Detection(BoundingBox b, int cls, double conf)
    : box(b), class_id(cls), confidence(conf) {
  if (!(conf >= 0.0 && conf <= 1.0)) {
    throw InvalidArgument("detection confidence outside [0,1]: " + std::to_string(conf));
  }
}

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
  for (double v : values_) {
    if (!std::isfinite(v)) throw InvalidEmbedding("embedding has a non-finite entry");
  }
}

double EmbeddingVector::norm() const noexcept {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return std::sqrt(s);
}

PlateAlphabet::PlateAlphabet() : PlateAlphabet("ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789") {}

PlateAlphabet::PlateAlphabet(std::string chars) : chars_(std::move(chars)) {
  if (chars_.empty()) throw InvalidArgument("plate alphabet is empty");
  for (unsigned char c : chars_) member_[c] = true;
}

bool PlateAlphabet::contains(char c) const noexcept {
  return member_[static_cast<unsigned char>(c)];
}

std::string PlateAlphabet::normalize(std::string_view raw, bool* changed) const {
  std::string out;
  out.reserve(raw.size());
  bool diff = false;
  for (char c : raw) {
    char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (u != c) diff = true;
    if (contains(u)) {
      out.push_back(u);
    } else {
      diff = true;
    }
  }
  if (changed != nullptr) *changed = diff;
  return out;
}

PlateString::PlateString(std::string c, double conf) : chars(std::move(c)), confidence(conf) {
  if (!(conf >= 0.0 && conf <= 1.0)) {
    throw InvalidArgument("plate confidence outside [0,1]: " + std::to_string(conf));
  }
}

std::string_view to_string(Colorspace cs) {
  return cs == Colorspace::kGray ? "gray" : "rgb";
}

ImageRef::ImageRef(std::filesystem::path p, int w, int h, int depth, Colorspace cs)
    : path(std::move(p)), width(w), height(h), bit_depth(depth), colorspace(cs) {
  if (w < 1 || h < 1) throw InvalidArgument("image dimensions must be >= 1");
  if (depth < 1 || depth > 16) throw InvalidArgument("unsupported bit depth");
}

double iou(const BoundingBox& a, const BoundingBox& b) noexcept {
  const double iw = std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
  const double ih = std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.size() != b.size()) {
    throw InvalidEmbedding("embedding length mismatch: " + std::to_string(a.size()) + " vs " +
                           std::to_string(b.size()));
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    dot += av[i] * bv[i];
    na += av[i] * av[i];
    nb += bv[i] * bv[i];
  }
  if (na == 0.0 || nb == 0.0) throw InvalidEmbedding("zero-norm embedding");
  // sqrt(na * nb) keeps cos(v, v) exactly 1.
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

}  // namespace mvqa
