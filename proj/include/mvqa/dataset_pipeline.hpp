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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvqa/core_types.hpp"
#include "mvqa/image.hpp"
#include "mvqa/manifest.hpp"
#include "mvqa/vision_backends.hpp"

namespace mvqa {

// A codec and its quality-factor grid. The built-in "jpeg" codec needs no
// external tools; any other codec runs shell command templates:
//   encode_command: {input} (a .ppm), {output} (bitstream), {qf}
//   decode_command: {input} (bitstream), {output} (a .ppm)
struct CodecSpec {
  std::string name = "jpeg";
  std::string encode_command;
  std::string decode_command;
  // Bitstream file extension for external codecs.
  std::string extension = "bin";
  std::vector<double> quality_grid{10, 30, 50, 70, 90};
  // Range and step searched by calibrate_quality_grid.
  double min_quality = 1;
  double max_quality = 100;
  double quality_step = 1;
  // When false a failure of this codec is logged and skipped by the sweep.
  bool mandatory = true;

  bool builtin() const noexcept { return encode_command.empty(); }
  // Extension of the stored, decodable variant file.
  std::string variant_extension() const { return builtin() ? "jpg" : "ppm"; }
};

// Throws InvalidArgument unless the grid is non-empty, sorted and within range.
void validate_codec(const CodecSpec& codec);

CodecSpec jpeg_codec(std::vector<double> grid = {10, 30, 50, 70, 90});

// Encodes and decodes in memory. For external codecs the tool output is
// appended to `log_dir`/{codec}_{qf}.log when a log dir is given.
// Throws EncoderError (with diagnostics) on failure or a dimension change.
Image encode_decode(const Image& source, const CodecSpec& codec, double qf,
                    const std::filesystem::path& log_dir = {});

// Encodes `source` and stores a decodable variant at `output` (JPEG bytes for
// the built-in codec, the decoded .ppm otherwise).
ImageRef encode_variant(const ImageRef& source, const CodecSpec& codec, double qf,
                        const std::filesystem::path& output,
                        const std::filesystem::path& log_dir = {});

// 10 log10(255^2 / MSE) over all channels; kPsnrCapDb when MSE = 0 (and never
// above it). Throws InvalidArgument on a size or channel mismatch.
double compute_psnr(const Image& ref, const Image& dist);
double compute_psnr(const ImageRef& ref, const ImageRef& dist);

// Normalised weights on bins of equal width; bin k is centred at
// origin + k * bin_width.
struct PsnrHistogram {
  double origin = 0.0;
  double bin_width = 1.0;
  std::map<long, double> weights;

  long bin_of(double psnr) const;
  double center(long bin) const { return origin + static_cast<double>(bin) * bin_width; }
};

PsnrHistogram make_psnr_histogram(std::span<const double> psnrs, double bin_width = 1.0,
                                  double origin = 0.0);
// Earth-mover (1-D Wasserstein) distance between bin-centre distributions.
// Histograms must share origin and bin width.
double earth_mover_distance(const PsnrHistogram& a, const PsnrHistogram& b);

// PSNR of corpus image `index` encoded at `qf`.
using PsnrProbe = std::function<double(std::size_t index, double qf)>;

struct CalibrationResult {
  std::vector<double> grid;  // sorted
  double distance = 0.0;
  std::vector<std::string> warnings;
};

// Coordinate descent over the codec's quality range: each grid point in turn
// moves to the candidate that strictly lowers the distance (ties keep the
// current value, then the lower quality). Starts from codec.quality_grid when
// it has `grid_size` points, else from an evenly spaced grid.
CalibrationResult calibrate_quality_grid(std::size_t corpus_size, const PsnrProbe& probe,
                                         const CodecSpec& codec, const PsnrHistogram& target,
                                         std::size_t grid_size);
CalibrationResult calibrate_quality_grid(std::span<const Image> corpus, const CodecSpec& codec,
                                         const PsnrHistogram& target, std::size_t grid_size);

// Histogram of the PSNRs the codec's own grid produces on the corpus.
PsnrHistogram measure_grid_histogram(std::span<const Image> corpus, const CodecSpec& codec,
                                     double bin_width = 1.0);

using FrameLoader = std::function<Image(const ImageRef&)>;
Image load_frame(const ImageRef& ref);

// Keeps frames with at least one detection at conf >= conf_threshold, at least
// min_gap frames after the previously kept one. Sub-threshold detections are
// dropped from the GT. Frame ids are "f%06d" of the frame index.
std::vector<LabeledFrame> autolabel_frames(std::span<const ImageRef> frames,
                                           const DetectorBackend& detector,
                                           double conf_threshold, std::size_t min_gap,
                                           const FrameLoader& loader = load_frame);

// Region read for a GT plate box: the box grown by `padding` of its size on
// each side, clipped to the image.
PixelRect padded_rect(const BoundingBox& box, double padding, int width, int height);

// Reads every GT plate of each frame and keeps the frame only if all plates
// are read with confidence 1.0 and each string is more than max_distance
// edits from every previously kept plate. Kept frames get their plate strings.
std::vector<LabeledFrame> dedup_plate_frames(std::vector<LabeledFrame> frames,
                                             const PlateRecognizer& recognizer,
                                             std::size_t max_distance, double read_padding = 0.1,
                                             const FrameLoader& loader = load_frame);

// Same rule on already-read strings, in order. Returns the kept indices.
std::vector<std::size_t> dedup_plate_strings(std::span<const std::vector<std::string>> plates,
                                             std::size_t max_distance);

struct FacePair {
  std::string person_id;
  ImageRef database;
  ImageRef query;
};

struct FacePairSelection {
  std::vector<FacePair> pairs;  // ordered by person id
  std::size_t skipped_persons = 0;
};

// Database image = highest detector confidence (ties: lexicographically lower
// path); query = a seeded-random choice among the remaining images. Persons
// with fewer than two images are skipped and counted.
FacePairSelection select_face_pairs(const std::map<std::string, std::vector<ImageRef>>& persons,
                                    const DetectorBackend& detector, std::uint64_t seed,
                                    const FrameLoader& loader = load_frame);

struct CropSet {
  std::size_t object_id = 0;
  PixelRect rect;
  bool clipped = false;
  Image ref_crop;
  // Parallel to frame.variants.
  std::vector<Image> variant_crops;
};

// Crops every GT object from the source and every variant with one shared
// window: the box grown by padding_fraction of its size on each side (outer
// edges rounded outward), then clipped. Clipping is logged.
std::vector<CropSet> extract_crops(const LabeledFrame& frame, double padding_fraction,
                                   const std::filesystem::path& base_dir = {},
                                   const FrameLoader& loader = load_frame);

// Resolves a manifest path against the run root.
std::filesystem::path resolve_path(const std::filesystem::path& base_dir, const std::string& p);

}  // namespace mvqa
