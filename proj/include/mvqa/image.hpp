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
#include <vector>

#include "mvqa/core_types.hpp"

namespace mvqa {

// Interleaved 8-bit raster, 1 (gray) or 3 (RGB) channels.
struct Image {
  Image() = default;
  Image(int w, int h, int c, std::uint8_t fill = 0);

  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;

  bool empty() const noexcept { return data.empty(); }
  std::uint8_t& at(int x, int y, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  Colorspace colorspace() const noexcept {
    return channels == 1 ? Colorspace::kGray : Colorspace::kRgb;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

// Integer pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;
  int width() const noexcept { return x1 - x0; }
  int height() const noexcept { return y1 - y0; }
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

// Reads .ppm/.pgm (binary P5/P6) and .jpg/.jpeg. Throws DecodeError.
Image load_image(const std::filesystem::path& path);
// Writes .ppm/.pgm losslessly or .jpg at quality 95. Atomic (temp + rename).
void save_image(const Image& img, const std::filesystem::path& path);
ImageRef describe(const Image& img, const std::filesystem::path& path);

std::vector<std::uint8_t> encode_jpeg(const Image& img, int quality);
Image decode_jpeg(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pnm(const Image& img);
Image decode_pnm(std::span<const std::uint8_t> bytes);

// BT.601 luma as doubles in [0, 255].
std::vector<double> luma(const Image& img);
Image to_gray(const Image& img);
Image to_rgb(const Image& img);

Image crop(const Image& img, const PixelRect& rect);
// Bilinear resampling with half-pixel centers and edge clamping. This kernel is
// part of every quality model's identity.
Image resize_bilinear(const Image& img, int width, int height);
// Separable box blur of the given radius, edge clamped.
Image box_blur(const Image& img, int radius);

}  // namespace mvqa
