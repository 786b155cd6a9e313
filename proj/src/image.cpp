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

#include "mvqa/image.hpp"

#include <jpeglib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <string>

#include "mvqa/io_util.hpp"

namespace mvqa {

Image::Image(int w, int h, int c, std::uint8_t fill)
    : width(w), height(h), channels(c),
      data(static_cast<std::size_t>(w) * h * c, fill) {
  if (w < 1 || h < 1 || (c != 1 && c != 3)) {
    throw InvalidArgument("bad image geometry " + std::to_string(w) + "x" + std::to_string(h) +
                          "x" + std::to_string(c));
  }
}

namespace {

std::string lower_ext(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  for (auto& ch : e) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return e;
}

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

}  // namespace

std::vector<std::uint8_t> encode_jpeg(const Image& img, int quality) {
  if (img.empty()) throw InvalidArgument("cannot encode an empty image");
  if (quality < 1 || quality > 100) {
    throw InvalidArgument("jpeg quality out of range [1,100]: " + std::to_string(quality));
  }
  jpeg_compress_struct cinfo{};
  JpegErrorMgr jerr{};
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  unsigned char* buffer = nullptr;
  unsigned long size = 0;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_compress(&cinfo);
    std::free(buffer);
    throw EncoderError("jpeg encode failed", jerr.message);
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &buffer, &size);
  cinfo.image_width = static_cast<JDIMENSION>(img.width);
  cinfo.image_height = static_cast<JDIMENSION>(img.height);
  cinfo.input_components = img.channels;
  cinfo.in_color_space = img.channels == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_set_defaults(&cinfo);
  cinfo.dct_method = JDCT_ISLOW;
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  const auto stride = static_cast<std::size_t>(img.width) * img.channels;
  while (cinfo.next_scanline < cinfo.image_height) {
    auto* row = const_cast<JSAMPLE*>(img.data.data() + cinfo.next_scanline * stride);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::vector<std::uint8_t> out(buffer, buffer + size);
  std::free(buffer);
  return out;
}

Image decode_jpeg(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct cinfo{};
  JpegErrorMgr jerr{};
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw DecodeError(std::string("jpeg decode failed: ") + jerr.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.dct_method = JDCT_ISLOW;
  cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);
  Image img(static_cast<int>(cinfo.output_width), static_cast<int>(cinfo.output_height),
            cinfo.output_components);
  const auto stride = static_cast<std::size_t>(img.width) * img.channels;
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPLE* row = img.data.data() + cinfo.output_scanline * stride;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

std::vector<std::uint8_t> encode_pnm(const Image& img) {
  if (img.empty()) throw InvalidArgument("cannot encode an empty image");
  std::string header = (img.channels == 1 ? "P5\n" : "P6\n") + std::to_string(img.width) + " " +
                       std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.data.begin(), img.data.end());
  return out;
}

Image decode_pnm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto next_token = [&]() {
    std::string tok;
    while (pos < bytes.size()) {
      char c = static_cast<char>(bytes[pos]);
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
      } else {
        break;
      }
    }
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
      tok.push_back(static_cast<char>(bytes[pos++]));
    }
    return tok;
  };
  const std::string magic = next_token();
  if (magic != "P5" && magic != "P6") throw DecodeError("not a binary PGM/PPM stream");
  int w = 0;
  int h = 0;
  int maxval = 0;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw DecodeError("malformed PNM header");
  }
  if (maxval != 255) throw DecodeError("only 8-bit PNM is supported");
  ++pos;  // single whitespace after maxval
  const int c = magic == "P5" ? 1 : 3;
  if (w < 1 || h < 1) throw DecodeError("bad PNM dimensions");
  const std::size_t need = static_cast<std::size_t>(w) * h * c;
  if (bytes.size() < pos + need) throw DecodeError("truncated PNM data");
  Image img(w, h, c);
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(pos), need, img.data.begin());
  return img;
}

Image load_image(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file_bytes(path);
  } catch (const Error& e) {
    throw DecodeError(e.what());
  }
  const std::string ext = lower_ext(path);
  if (ext == ".jpg" || ext == ".jpeg") return decode_jpeg(bytes);
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return decode_pnm(bytes);
  throw DecodeError("unsupported image format: " + path.string());
}

void save_image(const Image& img, const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".jpg" || ext == ".jpeg") {
    write_file_atomic(path, encode_jpeg(img, 95));
  } else if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") {
    if (ext == ".pgm" && img.channels != 1) {
      write_file_atomic(path, encode_pnm(to_gray(img)));
    } else if (ext == ".ppm" && img.channels != 3) {
      write_file_atomic(path, encode_pnm(to_rgb(img)));
    } else {
      write_file_atomic(path, encode_pnm(img));
    }
  } else {
    throw InvalidArgument("unsupported image format: " + path.string());
  }
}

ImageRef describe(const Image& img, const std::filesystem::path& path) {
  return ImageRef(path, img.width, img.height, 8, img.colorspace());
}

std::vector<double> luma(const Image& img) {
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  std::vector<double> y(n);
  if (img.channels == 1) {
    for (std::size_t i = 0; i < n; ++i) y[i] = img.data[i];
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = 0.299 * img.data[3 * i] + 0.587 * img.data[3 * i + 1] + 0.114 * img.data[3 * i + 2];
    }
  }
  return y;
}

Image to_gray(const Image& img) {
  if (img.channels == 1) return img;
  Image out(img.width, img.height, 1);
  const auto y = luma(img);
  for (std::size_t i = 0; i < y.size(); ++i) {
    out.data[i] = static_cast<std::uint8_t>(std::clamp(std::lround(y[i]), 0L, 255L));
  }
  return out;
}

Image to_rgb(const Image& img) {
  if (img.channels == 3) return img;
  Image out(img.width, img.height, 3);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    out.data[3 * i] = out.data[3 * i + 1] = out.data[3 * i + 2] = img.data[i];
  }
  return out;
}

Image crop(const Image& img, const PixelRect& r) {
  if (r.x0 < 0 || r.y0 < 0 || r.x1 > img.width || r.y1 > img.height || r.width() < 1 ||
      r.height() < 1) {
    throw InvalidArgument("crop rectangle outside image");
  }
  Image out(r.width(), r.height(), img.channels);
  const auto row = static_cast<std::size_t>(r.width()) * img.channels;
  for (int y = 0; y < r.height(); ++y) {
    const auto* src = &img.data[(static_cast<std::size_t>(r.y0 + y) * img.width + r.x0) *
                                img.channels];
    std::copy_n(src, row, &out.data[static_cast<std::size_t>(y) * row]);
  }
  return out;
}

Image resize_bilinear(const Image& img, int width, int height) {
  if (img.width == width && img.height == height) return img;
  Image out(width, height, img.channels);
  const double sx = static_cast<double>(img.width) / width;
  const double sy = static_cast<double>(img.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < img.channels; ++c) {
        const double top = img.at(x0, y0, c) * (1.0 - wx) + img.at(x1, y0, c) * wx;
        const double bot = img.at(x0, y1, c) * (1.0 - wx) + img.at(x1, y1, c) * wx;
        const double v = top * (1.0 - wy) + bot * wy;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

Image box_blur(const Image& img, int radius) {
  if (radius <= 0) return img;
  const int w = img.width;
  const int h = img.height;
  const int ch = img.channels;
  std::vector<double> tmp(img.data.size());
  const double norm = 1.0 / (2 * radius + 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double s = 0.0;
        for (int k = -radius; k <= radius; ++k) s += img.at(std::clamp(x + k, 0, w - 1), y, c);
        tmp[(static_cast<std::size_t>(y) * w + x) * ch + c] = s * norm;
      }
    }
  }
  Image out(w, h, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double s = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          s += tmp[(static_cast<std::size_t>(std::clamp(y + k, 0, h - 1)) * w + x) * ch + c];
        }
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(s * norm), 0L, 255L));
      }
    }
  }
  return out;
}

}  // namespace mvqa
