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

#include "mvqa/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mvqa/vision_backends.hpp"

namespace mvqa::synthetic {

namespace {

std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

void set_gray(Image& img, int x, int y, std::uint8_t v) {
  for (int c = 0; c < img.channels; ++c) img.at(x, y, c) = v;
}

int uniform_int(std::mt19937_64& rng, int lo, int hi_inclusive) {
  return std::uniform_int_distribution<int>(lo, hi_inclusive)(rng);
}

double uniform(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

bool separated(const BoundingBox& a, const BoundingBox& b, double margin) {
  return a.x_max() + margin <= b.x_min() || b.x_max() + margin <= a.x_min() ||
         a.y_max() + margin <= b.y_min() || b.y_max() + margin <= a.y_min();
}

}  // namespace

Image rectangle_card(int width, int height, const BoundingBox& box, std::uint8_t fill,
                     std::uint8_t background) {
  Image img(width, height, 3, background);
  for (int y = static_cast<int>(box.y_min()); y < static_cast<int>(box.y_max()) && y < height; ++y) {
    for (int x = static_cast<int>(box.x_min()); x < static_cast<int>(box.x_max()) && x < width; ++x) {
      set_gray(img, x, y, fill);
    }
  }
  return img;
}

Image add_noise(const Image& img, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, sigma);
  Image out = img;
  for (auto& v : out.data) v = clamp_u8(v + dist(rng));
  return out;
}

Scene object_scene(std::uint64_t seed, int width, int height) {
  std::mt19937_64 rng(seed);
  Scene scene{Image(width, height, 3, kBackground), {}, {}};
  const int count = uniform_int(rng, 2, 4);
  for (int k = 0; k < count; ++k) {
    for (int attempt = 0; attempt < 50; ++attempt) {
      const int w = uniform_int(rng, 16, 47);
      const int h = uniform_int(rng, 16, 47);
      const int x = uniform_int(rng, 0, width - w - 1);
      const int y = uniform_int(rng, 0, height - h - 1);
      const BoundingBox box(x, y, x + w, y + h);
      if (!std::all_of(scene.boxes.begin(), scene.boxes.end(),
                       [&](const BoundingBox& b) { return separated(box, b, 4.0); })) {
        continue;
      }
      // Integer amplitude just above the detector's threshold of 40.
      const int amplitude = 41 + static_cast<int>(std::floor(60.0 * std::pow(uniform(rng), 2.0)));
      const int cell = uniform_int(rng, 1, 2);
      for (int yy = 0; yy < h; ++yy) {
        for (int xx = 0; xx < w; ++xx) {
          const int sign = ((xx / cell + yy / cell) % 2 == 0) ? -1 : 1;
          set_gray(scene.image, x + xx, y + yy, clamp_u8(kBackground + sign * amplitude));
        }
      }
      scene.boxes.push_back(box);
      break;
    }
  }
  return scene;
}

int plate_width(std::size_t glyphs, int scale) {
  return 4 * scale + 6 * scale * static_cast<int>(glyphs) - scale;
}

int plate_height(int scale) { return 11 * scale; }

void draw_plate(Image& img, const std::string& text, int x, int y, int scale,
                std::uint8_t background, std::uint8_t ink) {
  const int pw = plate_width(text.size(), scale);
  const int ph = plate_height(scale);
  for (int yy = y; yy < y + ph; ++yy) {
    for (int xx = x; xx < x + pw; ++xx) set_gray(img, xx, yy, background);
  }
  for (std::size_t i = 0; i < text.size(); ++i) {
    const std::uint64_t bits = glyph_bits(text[i]);
    const int gx = x + 2 * scale + 6 * scale * static_cast<int>(i);
    const int gy = y + 2 * scale;
    for (int r = 0; r < 7; ++r) {
      for (int c = 0; c < 5; ++c) {
        if (((bits >> (r * 5 + c)) & 1U) == 0) continue;
        for (int dy = 0; dy < scale; ++dy) {
          for (int dx = 0; dx < scale; ++dx) set_gray(img, gx + c * scale + dx, gy + r * scale + dy, ink);
        }
      }
    }
  }
}

Image render_plate(const std::string& text, int scale, std::uint8_t background, std::uint8_t ink,
                   int pad) {
  Image img(plate_width(text.size(), scale) + 2 * pad, plate_height(scale) + 2 * pad, 3, 60);
  draw_plate(img, text, pad, pad, scale, background, ink);
  return img;
}

Scene plate_scene(std::uint64_t seed, int width, int height) {
  std::mt19937_64 rng(seed);
  Scene scene{Image(width, height, 3, 60), {}, {}};
  const int count = uniform_int(rng, 1, 2);
  const std::string& chars = font_characters();
  for (int k = 0; k < count; ++k) {
    std::string text;
    for (int i = 0; i < 6; ++i) text.push_back(chars[static_cast<std::size_t>(uniform_int(rng, 0, 35))]);
    const int scale = uniform_int(rng, 1, 2);
    const int pw = plate_width(text.size(), scale);
    const int ph = plate_height(scale);
    const auto background = static_cast<std::uint8_t>(uniform_int(rng, 200, 235));
    const auto ink = clamp_u8(background - (40.0 + 140.0 * std::pow(uniform(rng), 2.0)));
    for (int attempt = 0; attempt < 50; ++attempt) {
      const int x = uniform_int(rng, 2, width - pw - 3);
      const int y = uniform_int(rng, 2, height - ph - 3);
      const BoundingBox box(x, y, x + pw, y + ph);
      if (!std::all_of(scene.boxes.begin(), scene.boxes.end(),
                       [&](const BoundingBox& b) { return separated(box, b, 8.0); })) {
        continue;
      }
      draw_plate(scene.image, text, x, y, scale, background, ink);
      scene.boxes.push_back(box);
      scene.plates.push_back(text);
      break;
    }
  }
  return scene;
}

Image face_image(std::uint64_t person, std::uint64_t shot, int size) {
  std::mt19937_64 id_rng(0x9e3779b97f4a7c15ULL ^ (person * 0x100000001b3ULL));
  std::mt19937_64 shot_rng((person + 1) * 0x2545f4914f6cdd1dULL + shot * 0x9e3779b97f4a7c15ULL);

  const double tone = 150.0 + 60.0 * uniform(id_rng);
  struct Blob {
    double x, y, sigma, amp;
  };
  std::vector<Blob> blobs;
  for (int i = 0; i < 8; ++i) {
    blobs.push_back({-0.6 + 1.2 * uniform(id_rng), -0.7 + 1.4 * uniform(id_rng),
                     0.04 + 0.08 * uniform(id_rng), (uniform(id_rng) < 0.5 ? -1.0 : 1.0) *
                                                        (25.0 + 35.0 * uniform(id_rng))});
  }
  const double eye_dx = 0.25 + 0.15 * uniform(id_rng);
  const double eye_y = -0.35 + 0.2 * uniform(id_rng);

  const double shift_x = uniform_int(shot_rng, -3, 3);
  const double shift_y = uniform_int(shot_rng, -3, 3);
  const double brightness = -10.0 + 20.0 * uniform(shot_rng);
  const double noise_sigma = 6.0 * uniform(shot_rng);
  std::normal_distribution<double> noise(0.0, 1.0);

  Image img(size, size, 3);
  const double cx = size / 2.0 + shift_x;
  const double cy = size / 2.0 + shift_y;
  const double rx = 0.32 * size;
  const double ry = 0.40 * size;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u = (x + 0.5 - cx) / rx;
      const double v = (y + 0.5 - cy) / ry;
      double val = 100.0;
      double tint = 0.0;
      if (u * u + v * v <= 1.0) {
        val = tone;
        for (const auto& b : blobs) {
          const double d2 = (u - b.x) * (u - b.x) + (v - b.y) * (v - b.y);
          val += b.amp * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
        }
        for (double ex : {-eye_dx, eye_dx}) {
          const double du = (u - ex) / 0.12;
          const double dv = (v - eye_y) / 0.06;
          if (du * du + dv * dv <= 1.0) val = 40.0;
        }
        tint = 12.0;
      }
      val += brightness + noise_sigma * noise(shot_rng);
      img.at(x, y, 0) = clamp_u8(val + tint);
      img.at(x, y, 1) = clamp_u8(val);
      img.at(x, y, 2) = clamp_u8(val - tint);
    }
  }
  return img;
}

}  // namespace mvqa::synthetic
