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

#include "mvqa/vision_backends.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <deque>
#include <random>

namespace mvqa {

std::string to_string(Task t) {
  switch (t) {
    case Task::kObject:
      return "object";
    case Task::kFace:
      return "face";
    case Task::kPlate:
      return "plate";
  }
  return "?";
}

Task task_from_string(const std::string& s) {
  if (s == "object") return Task::kObject;
  if (s == "face") return Task::kFace;
  if (s == "plate") return Task::kPlate;
  throw InvalidArgument("unknown task: " + s);
}

std::vector<Detection> DetectorBackend::detect(const ImageRef& ref) const {
  return detect(load_image(ref.path));
}

std::vector<std::vector<Detection>> DetectorBackend::detect_batch(
    const std::vector<Image>& images) const {
  std::vector<std::vector<Detection>> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(detect(img));
  return out;
}

namespace {

// Integer BT.601 luma so flat regions give exactly equal values.
std::vector<int> int_luma(const Image& img) {
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (img.channels == 1) {
      y[i] = img.data[i];
    } else {
      y[i] = (299 * img.data[3 * i] + 587 * img.data[3 * i + 1] + 114 * img.data[3 * i + 2] +
              500) / 1000;
    }
  }
  return y;
}

int percentile(std::vector<int> v, double q) {
  const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(v.size() - 1)));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

struct Component {
  std::vector<std::size_t> pixels;
  int x0, y0, x1, y1;  // inclusive-exclusive bounds
};

// 4-connected components of `mask`, discovered in row-major order.
std::vector<Component> components(const std::vector<bool>& mask, int w, int h) {
  std::vector<Component> out;
  std::vector<bool> seen(mask.size(), false);
  std::deque<std::size_t> queue;
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask[start] || seen[start]) continue;
    Component c{{}, w, h, 0, 0};
    seen[start] = true;
    queue.push_back(start);
    while (!queue.empty()) {
      const std::size_t p = queue.front();
      queue.pop_front();
      c.pixels.push_back(p);
      const int x = static_cast<int>(p % w);
      const int y = static_cast<int>(p / w);
      c.x0 = std::min(c.x0, x);
      c.y0 = std::min(c.y0, y);
      c.x1 = std::max(c.x1, x + 1);
      c.y1 = std::max(c.y1, y + 1);
      const std::array<std::pair<int, int>, 4> nb{{{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}}};
      for (auto [nx, ny] : nb) {
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const auto q = static_cast<std::size_t>(ny) * w + nx;
        if (mask[q] && !seen[q]) {
          seen[q] = true;
          queue.push_back(q);
        }
      }
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

std::vector<Detection> SyntheticDetector::detect(const Image& image) const {
  if (image.empty()) throw DecodeError("empty image");
  const auto y = int_luma(image);
  const int bg = percentile(y, 0.5);
  std::vector<int> dev(y.size());
  std::vector<bool> mask(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    dev[i] = std::abs(y[i] - bg);
    mask[i] = dev[i] >= p_.contrast_threshold;
  }
  std::vector<Detection> out;
  for (const auto& c : components(mask, image.width, image.height)) {
    if (static_cast<int>(c.pixels.size()) < p_.min_area) continue;
    const double k = static_cast<double>(c.pixels.size());
    double sum = 0.0;
    for (auto p : c.pixels) sum += dev[p];
    const double s = sum / k;
    double var = 0.0;
    for (auto p : c.pixels) var += (dev[p] - s) * (dev[p] - s);
    var /= k;
    const double conf = (s * s) / (s * s + p_.kappa * var);
    out.emplace_back(BoundingBox(c.x0, c.y0, c.x1, c.y1), p_.class_id, std::clamp(conf, 0.0, 1.0));
  }
  // Enclosed components (holes inside a larger object) are not separate objects.
  std::vector<Detection> kept;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& a = out[i].box;
    bool nested = false;
    for (std::size_t j = 0; j < out.size() && !nested; ++j) {
      const auto& b = out[j].box;
      nested = j != i && b.area() > a.area() && b.x_min() <= a.x_min() && b.y_min() <= a.y_min() &&
               a.x_max() <= b.x_max() && a.y_max() <= b.y_max();
    }
    if (!nested) kept.push_back(out[i]);
  }
  return kept;
}

SyntheticEmbedder::SyntheticEmbedder(std::size_t dimension, int grid, std::uint64_t seed)
    : grid_(grid) {
  if (dimension == 0 || grid < 1) throw InvalidArgument("bad embedder geometry");
  const int cells = grid * grid;
  projection_.resize(static_cast<Eigen::Index>(dimension), cells);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(cells)));
  for (Eigen::Index i = 0; i < projection_.size(); ++i) projection_.data()[i] = dist(rng);
}

Eigen::VectorXd SyntheticEmbedder::pooled(const Image& image) const {
  if (image.width < grid_ || image.height < grid_) {
    throw BackendError("face crop smaller than the embedding grid");
  }
  const auto y = luma(image);
  Eigen::VectorXd p(grid_ * grid_);
  for (int gy = 0; gy < grid_; ++gy) {
    const int ya = gy * image.height / grid_;
    const int yb = (gy + 1) * image.height / grid_;
    for (int gx = 0; gx < grid_; ++gx) {
      const int xa = gx * image.width / grid_;
      const int xb = (gx + 1) * image.width / grid_;
      double s = 0.0;
      for (int yy = ya; yy < yb; ++yy) {
        for (int xx = xa; xx < xb; ++xx) s += y[static_cast<std::size_t>(yy) * image.width + xx];
      }
      p(gy * grid_ + gx) = s / ((yb - ya) * (xb - xa));
    }
  }
  p.array() -= p.mean();
  return p;
}

EmbeddingVector SyntheticEmbedder::embed(const Image& image) const {
  const Eigen::VectorXd e = projection_ * pooled(image);
  if (e.squaredNorm() == 0.0) throw InvalidEmbedding("zero embedding: no face in image");
  return EmbeddingVector(std::vector<double>(e.data(), e.data() + e.size()));
}

// ---------------------------------------------------------------------------
// Bitmap font: classic 5x7, stored column-major with bit 0 at the top row.

namespace {

struct GlyphDef {
  char ch;
  std::array<std::uint8_t, 5> cols;
};

constexpr std::array<GlyphDef, 36> kFont{{
    {'A', {0x7E, 0x11, 0x11, 0x11, 0x7E}}, {'B', {0x7F, 0x49, 0x49, 0x49, 0x36}},
    {'C', {0x3E, 0x41, 0x41, 0x41, 0x22}}, {'D', {0x7F, 0x41, 0x41, 0x22, 0x1C}},
    {'E', {0x7F, 0x49, 0x49, 0x49, 0x41}}, {'F', {0x7F, 0x09, 0x09, 0x09, 0x01}},
    {'G', {0x3E, 0x41, 0x49, 0x49, 0x7A}}, {'H', {0x7F, 0x08, 0x08, 0x08, 0x7F}},
    {'I', {0x00, 0x41, 0x7F, 0x41, 0x00}}, {'J', {0x20, 0x40, 0x41, 0x3F, 0x01}},
    {'K', {0x7F, 0x08, 0x14, 0x22, 0x41}}, {'L', {0x7F, 0x40, 0x40, 0x40, 0x40}},
    {'M', {0x7F, 0x02, 0x0C, 0x02, 0x7F}}, {'N', {0x7F, 0x04, 0x08, 0x10, 0x7F}},
    {'O', {0x3E, 0x41, 0x41, 0x41, 0x3E}}, {'P', {0x7F, 0x09, 0x09, 0x09, 0x06}},
    {'Q', {0x3E, 0x41, 0x51, 0x21, 0x5E}}, {'R', {0x7F, 0x09, 0x19, 0x29, 0x46}},
    {'S', {0x46, 0x49, 0x49, 0x49, 0x31}}, {'T', {0x01, 0x01, 0x7F, 0x01, 0x01}},
    {'U', {0x3F, 0x40, 0x40, 0x40, 0x3F}}, {'V', {0x1F, 0x20, 0x40, 0x20, 0x1F}},
    {'W', {0x3F, 0x40, 0x38, 0x40, 0x3F}}, {'X', {0x63, 0x14, 0x08, 0x14, 0x63}},
    {'Y', {0x07, 0x08, 0x70, 0x08, 0x07}}, {'Z', {0x61, 0x51, 0x49, 0x45, 0x43}},
    {'0', {0x3E, 0x51, 0x49, 0x45, 0x3E}}, {'1', {0x00, 0x42, 0x7F, 0x40, 0x00}},
    {'2', {0x42, 0x61, 0x51, 0x49, 0x46}}, {'3', {0x21, 0x41, 0x45, 0x4B, 0x31}},
    {'4', {0x18, 0x14, 0x12, 0x7F, 0x10}}, {'5', {0x27, 0x45, 0x45, 0x45, 0x39}},
    {'6', {0x3C, 0x4A, 0x49, 0x49, 0x30}}, {'7', {0x01, 0x71, 0x09, 0x05, 0x03}},
    {'8', {0x36, 0x49, 0x49, 0x49, 0x36}}, {'9', {0x06, 0x49, 0x49, 0x29, 0x1E}},
}};

}  // namespace

const std::string& font_characters() {
  static const std::string chars = [] {
    std::string s;
    for (const auto& g : kFont) s.push_back(g.ch);
    return s;
  }();
  return chars;
}

std::uint64_t glyph_bits(char c) {
  for (const auto& g : kFont) {
    if (g.ch != c) continue;
    std::uint64_t bits = 0;
    for (int col = 0; col < 5; ++col) {
      for (int row = 0; row < 7; ++row) {
        if ((g.cols[col] >> row) & 1U) bits |= std::uint64_t{1} << (row * 5 + col);
      }
    }
    return bits;
  }
  throw InvalidArgument(std::string("no glyph for character '") + c + "'");
}

SyntheticPlateRecognizer::SyntheticPlateRecognizer(int legibility_bits, PlateAlphabet alphabet)
    : legibility_bits_(legibility_bits), alphabet_(std::move(alphabet)) {}

PlateString SyntheticPlateRecognizer::recognize(const Image& image) const {
  constexpr int kMinContrast = 20;
  if (image.empty()) throw DecodeError("empty image");
  const int w = image.width;
  const int h = image.height;
  const auto y = int_luma(image);
  const int lo = percentile(y, 0.05);
  const int hi = percentile(y, 0.95);
  if (hi - lo < kMinContrast) return {"", 0.0};

  std::vector<bool> bright(y.size());
  const int mid = (lo + hi) / 2;
  for (std::size_t i = 0; i < y.size(); ++i) bright[i] = y[i] >= mid;
  const auto comps = components(bright, w, h);
  const Component* plate = nullptr;
  for (const auto& c : comps) {
    if (plate == nullptr || c.pixels.size() > plate->pixels.size()) plate = &c;
  }
  if (plate == nullptr) return {"", 0.0};

  const int pw = plate->x1 - plate->x0;
  const int ph = plate->y1 - plate->y0;
  const int s = std::max(1, static_cast<int>(std::lround(ph / 11.0)));
  const int n = static_cast<int>(std::lround(static_cast<double>(pw - 3 * s) / (6.0 * s)));
  if (n <= 0) return {"", 0.0};

  std::vector<int> inside;
  inside.reserve(static_cast<std::size_t>(pw) * ph);
  for (int yy = plate->y0; yy < plate->y1; ++yy) {
    for (int xx = plate->x0; xx < plate->x1; ++xx) inside.push_back(y[static_cast<std::size_t>(yy) * w + xx]);
  }
  const double plate_white = percentile(std::move(inside), 0.95);

  // Mean luma of each glyph cell, row-major 7x5 per glyph.
  std::vector<std::array<double, 35>> cells(static_cast<std::size_t>(n));
  double darkest = plate_white;
  for (int g = 0; g < n; ++g) {
    const int gx = plate->x0 + 2 * s + 6 * s * g;
    const int gy = plate->y0 + 2 * s;
    for (int r = 0; r < 7; ++r) {
      for (int c = 0; c < 5; ++c) {
        double sum = 0.0;
        int count = 0;
        for (int yy = gy + r * s; yy < gy + (r + 1) * s; ++yy) {
          for (int xx = gx + c * s; xx < gx + (c + 1) * s; ++xx) {
            if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
            sum += y[static_cast<std::size_t>(yy) * w + xx];
            ++count;
          }
        }
        const double v = count > 0 ? sum / count : plate_white;
        cells[g][r * 5 + c] = v;
        darkest = std::min(darkest, v);
      }
    }
  }
  if (plate_white - darkest < kMinContrast) return {"", 0.0};
  const double threshold = (plate_white + darkest) / 2.0;

  std::string text;
  double score = 0.0;
  for (const auto& cell : cells) {
    std::uint64_t bits = 0;
    for (int k = 0; k < 35; ++k) {
      if (cell[k] < threshold) bits |= std::uint64_t{1} << k;
    }
    if (bits == 0) continue;
    int best = 36;
    char best_char = 0;
    for (char ch : font_characters()) {
      if (!alphabet_.contains(ch)) continue;
      const int d = std::popcount(bits ^ glyph_bits(ch));
      if (d < best) {
        best = d;
        best_char = ch;
      }
    }
    if (best <= legibility_bits_) {
      text.push_back(best_char);
      score += 1.0 - best / 35.0;
    }
  }
  return {text, std::clamp(score / n, 0.0, 1.0)};
}

std::unique_ptr<DetectorBackend> make_detector(const std::string& name, Task task) {
  if (name == "synthetic") return std::make_unique<SyntheticDetector>(task);
  throw ConfigError("unknown detector backend: " + name);
}

std::unique_ptr<FaceEmbedder> make_embedder(const std::string& name) {
  if (name == "synthetic") return std::make_unique<SyntheticEmbedder>();
  throw ConfigError("unknown face embedder backend: " + name);
}

std::unique_ptr<PlateRecognizer> make_recognizer(const std::string& name) {
  if (name == "synthetic") return std::make_unique<SyntheticPlateRecognizer>();
  throw ConfigError("unknown plate recognizer backend: " + name);
}

}  // namespace mvqa
