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

// Procedural test scenes for the synthetic oracle backends.

#include <cstdint>
#include <string>
#include <vector>

#include "mvqa/core_types.hpp"
#include "mvqa/image.hpp"

namespace mvqa::synthetic {

inline constexpr std::uint8_t kBackground = 128;

// Filled rectangle on a flat background.
Image rectangle_card(int width, int height, const BoundingBox& box, std::uint8_t fill,
                     std::uint8_t background = kBackground);

// Adds N(0, sigma) noise per channel, rounded and clamped.
Image add_noise(const Image& img, double sigma, std::uint64_t seed);

struct Scene {
  Image image;
  std::vector<BoundingBox> boxes;
  std::vector<std::string> plates;  // plate scenes only, one per box
};

// 2-4 non-overlapping checkerboard-textured rectangles (cell 1-2 px) on a flat
// background. Texture amplitudes are skewed toward the detector threshold so
// that compression erodes some objects earlier than others.
Scene object_scene(std::uint64_t seed, int width = 160, int height = 120);

// Plate geometry: margin 2s, glyph 5s x 7s, pitch 6s, height 11s.
int plate_width(std::size_t glyphs, int scale);
int plate_height(int scale);
// Draws `text` onto `img` as a plate whose top-left corner is (x, y).
void draw_plate(Image& img, const std::string& text, int x, int y, int scale,
                std::uint8_t background, std::uint8_t ink);
// Standalone plate on a dark surround `pad` pixels wide.
Image render_plate(const std::string& text, int scale, std::uint8_t background = 220,
                   std::uint8_t ink = 40, int pad = 6);

// One or two random 6-character plates on a dark road-like background.
Scene plate_scene(std::uint64_t seed, int width = 160, int height = 120);

// Face proxy for `person` (identity pattern) with per-shot variation `shot`.
Image face_image(std::uint64_t person, std::uint64_t shot, int size = 112);

}  // namespace mvqa::synthetic
