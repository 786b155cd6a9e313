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

#include "mvqa/dataset_pipeline.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <utility>

#include "mvqa/io_util.hpp"
#include "mvqa/log.hpp"
#include "mvqa/recognition_targets.hpp"

namespace mvqa {

namespace fs = std::filesystem;

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

std::string substitute(std::string tmpl, const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) {
    const std::string token = "{" + key + "}";
    for (auto pos = tmpl.find(token); pos != std::string::npos;
         pos = tmpl.find(token, pos + value.size())) {
      tmpl.replace(pos, token.size(), value);
    }
  }
  return tmpl;
}

bool executable_exists(const std::string& command) {
  std::istringstream in(command);
  std::string binary;
  in >> binary;
  if (binary.empty()) return false;
  if (binary.find('/') != std::string::npos) return ::access(binary.c_str(), X_OK) == 0;
  const char* path_env = std::getenv("PATH");
  std::stringstream dirs(path_env ? path_env : "");
  std::string dir;
  while (std::getline(dirs, dir, ':')) {
    if (dir.empty()) continue;
    const auto candidate = fs::path(dir) / binary;
    if (::access(candidate.c_str(), X_OK) == 0) return true;
  }
  return false;
}

// Runs `command` through the shell with stdout/stderr sent to `log`.
// Returns the exit status.
int run_logged(const std::string& command, const fs::path& log) {
  const std::string full = command + " >>" + shell_quote(log.string()) + " 2>&1";
  const int status = std::system(full.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : 128;
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    path_ = fs::temp_directory_path() /
            ("mvqa-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const noexcept { return path_; }

 private:
  fs::path path_;
};

Image external_encode_decode(const Image& source, const CodecSpec& codec, double qf,
                             const fs::path& log_dir) {
  if (!executable_exists(codec.encode_command)) {
    throw EncoderError("encoder binary for codec '" + codec.name + "' not found",
                       "command template: " + codec.encode_command);
  }
  if (!executable_exists(codec.decode_command)) {
    throw EncoderError("decoder binary for codec '" + codec.name + "' not found",
                       "command template: " + codec.decode_command);
  }
  TempDir tmp;
  const auto input = tmp.path() / "input.ppm";
  const auto bitstream = tmp.path() / ("encoded." + codec.extension);
  const auto decoded = tmp.path() / "decoded.ppm";
  const auto log = tmp.path() / "tool.log";
  save_image(to_rgb(source), input);

  const std::string q = format_quality(qf);
  const auto enc = substitute(codec.encode_command, {{"input", shell_quote(input.string())},
                                                     {"output", shell_quote(bitstream.string())},
                                                     {"qf", q}});
  const auto dec = substitute(codec.decode_command, {{"input", shell_quote(bitstream.string())},
                                                     {"output", shell_quote(decoded.string())},
                                                     {"qf", q}});
  const int enc_status = run_logged(enc, log);
  const int dec_status = enc_status == 0 ? run_logged(dec, log) : -1;

  std::string diagnostics = fs::exists(log) ? read_file_text(log) : std::string{};
  if (!log_dir.empty()) {
    fs::create_directories(log_dir);
    std::ofstream(log_dir / (codec.name + "_" + q + ".log"), std::ios::app)
        << "$ " << enc << "\n$ " << dec << "\n" << diagnostics;
  }
  if (enc_status != 0) {
    throw EncoderError("encoder for codec '" + codec.name + "' failed with status " +
                           std::to_string(enc_status),
                       diagnostics);
  }
  if (dec_status != 0) {
    throw EncoderError("decoder for codec '" + codec.name + "' failed with status " +
                           std::to_string(dec_status),
                       diagnostics);
  }
  Image out;
  try {
    out = load_image(decoded);
  } catch (const Error& e) {
    throw EncoderError("codec '" + codec.name + "' produced an undecodable image: " + e.what(),
                       diagnostics);
  }
  return source.channels == 1 ? to_gray(out) : to_rgb(out);
}

// Box grown by `padding` of its size per side; outer edges rounded outward.
// The epsilon keeps exact products (10 * 0.1) from stepping a pixel further.
PixelRect unclipped_rect(const BoundingBox& box, double padding) {
  constexpr double kEps = 1e-9;
  const double px = padding * box.width();
  const double py = padding * box.height();
  return {static_cast<int>(std::floor(box.x_min() - px + kEps)),
          static_cast<int>(std::floor(box.y_min() - py + kEps)),
          static_cast<int>(std::ceil(box.x_max() + px - kEps)),
          static_cast<int>(std::ceil(box.y_max() + py - kEps))};
}

}  // namespace

void validate_codec(const CodecSpec& codec) {
  if (codec.name.empty()) throw InvalidArgument("codec name is empty");
  if (codec.quality_grid.empty()) throw InvalidArgument("codec '" + codec.name + "': empty grid");
  if (!std::is_sorted(codec.quality_grid.begin(), codec.quality_grid.end())) {
    throw InvalidArgument("codec '" + codec.name + "': quality grid is not sorted");
  }
  if (codec.min_quality > codec.max_quality || !(codec.quality_step > 0)) {
    throw InvalidArgument("codec '" + codec.name + "': bad quality range");
  }
  if (codec.quality_grid.front() < codec.min_quality ||
      codec.quality_grid.back() > codec.max_quality) {
    throw InvalidArgument("codec '" + codec.name + "': quality grid outside [" +
                          format_double(codec.min_quality) + ", " +
                          format_double(codec.max_quality) + "]");
  }
  if (codec.builtin()) {
    if (codec.name != "jpeg") {
      throw InvalidArgument("codec '" + codec.name + "' has no encode command");
    }
    for (double q : codec.quality_grid) {
      if (q < 1 || q > 100 || q != std::floor(q)) {
        throw InvalidArgument("jpeg quality must be an integer in [1, 100], got " +
                              format_double(q));
      }
    }
  } else if (codec.decode_command.empty()) {
    throw InvalidArgument("codec '" + codec.name + "' has no decode command");
  }
}

CodecSpec jpeg_codec(std::vector<double> grid) {
  CodecSpec c;
  c.quality_grid = std::move(grid);
  return c;
}

Image encode_decode(const Image& source, const CodecSpec& codec, double qf,
                    const fs::path& log_dir) {
  Image out;
  if (codec.builtin()) {
    out = decode_jpeg(encode_jpeg(source, static_cast<int>(std::lround(qf))));
  } else {
    out = external_encode_decode(source, codec, qf, log_dir);
  }
  if (out.width != source.width || out.height != source.height) {
    throw EncoderError("codec '" + codec.name + "' changed the image size", "");
  }
  return out;
}

ImageRef encode_variant(const ImageRef& source, const CodecSpec& codec, double qf,
                        const fs::path& output, const fs::path& log_dir) {
  const Image src = load_image(source.path);
  if (codec.builtin()) {
    const auto bytes = encode_jpeg(src, static_cast<int>(std::lround(qf)));
    const Image check = decode_jpeg(bytes);
    if (check.width != src.width || check.height != src.height) {
      throw EncoderError("jpeg round trip changed the image size", "");
    }
    write_file_atomic(output, bytes);
  } else {
    save_image(encode_decode(src, codec, qf, log_dir), output);
  }
  return ImageRef(output, src.width, src.height, 8, src.colorspace());
}

double compute_psnr(const Image& ref, const Image& dist) {
  if (ref.width != dist.width || ref.height != dist.height || ref.channels != dist.channels) {
    throw InvalidArgument("psnr: image geometry mismatch (" + std::to_string(ref.width) + "x" +
                          std::to_string(ref.height) + "x" + std::to_string(ref.channels) +
                          " vs " + std::to_string(dist.width) + "x" +
                          std::to_string(dist.height) + "x" + std::to_string(dist.channels) +
                          ")");
  }
  if (ref.data.empty()) throw InvalidArgument("psnr: empty image");
  std::uint64_t sse = 0;
  for (std::size_t i = 0; i < ref.data.size(); ++i) {
    const int d = static_cast<int>(ref.data[i]) - static_cast<int>(dist.data[i]);
    sse += static_cast<std::uint64_t>(d * d);
  }
  if (sse == 0) return kPsnrCapDb;
  const double mse = static_cast<double>(sse) / static_cast<double>(ref.data.size());
  return std::min(kPsnrCapDb, 10.0 * std::log10(255.0 * 255.0 / mse));
}

double compute_psnr(const ImageRef& ref, const ImageRef& dist) {
  if (ref.bit_depth != dist.bit_depth) throw InvalidArgument("psnr: bit depth mismatch");
  return compute_psnr(load_image(ref.path), load_image(dist.path));
}

long PsnrHistogram::bin_of(double psnr) const {
  return std::lround((psnr - origin) / bin_width);
}

PsnrHistogram make_psnr_histogram(std::span<const double> psnrs, double bin_width,
                                  double origin) {
  if (!(bin_width > 0)) throw InvalidArgument("histogram bin width must be positive");
  PsnrHistogram h;
  h.origin = origin;
  h.bin_width = bin_width;
  if (psnrs.empty()) return h;
  const double w = 1.0 / static_cast<double>(psnrs.size());
  for (double p : psnrs) h.weights[h.bin_of(p)] += w;
  return h;
}

double earth_mover_distance(const PsnrHistogram& a, const PsnrHistogram& b) {
  if (a.origin != b.origin || a.bin_width != b.bin_width) {
    throw InvalidArgument("histograms use different bins");
  }
  auto total = [](const PsnrHistogram& h) {
    double s = 0;
    for (const auto& [_, w] : h.weights) s += w;
    return s;
  };
  const double ta = total(a);
  const double tb = total(b);
  if (ta <= 0 || tb <= 0) throw InvalidArgument("empty histogram");
  std::map<long, double> diff;
  for (const auto& [k, w] : a.weights) diff[k] += w / ta;
  for (const auto& [k, w] : b.weights) diff[k] -= w / tb;
  double cumulative = 0.0;
  double distance = 0.0;
  long prev = 0;
  bool first = true;
  for (const auto& [k, d] : diff) {
    if (!first) distance += std::fabs(cumulative) * static_cast<double>(k - prev) * a.bin_width;
    cumulative += d;
    prev = k;
    first = false;
  }
  return distance;
}

CalibrationResult calibrate_quality_grid(std::size_t corpus_size, const PsnrProbe& probe,
                                         const CodecSpec& codec, const PsnrHistogram& target,
                                         std::size_t grid_size) {
  if (corpus_size == 0) throw InvalidArgument("calibration corpus is empty");
  if (grid_size == 0) throw InvalidArgument("grid size must be positive");
  if (target.weights.empty()) throw InvalidArgument("target histogram is empty");

  std::vector<double> candidates;
  for (double q = codec.min_quality; q <= codec.max_quality + 1e-9; q += codec.quality_step) {
    candidates.push_back(q);
  }
  if (candidates.size() < grid_size) {
    throw InvalidArgument("codec quality range has fewer candidates than the grid size");
  }

  std::map<std::pair<std::size_t, double>, double> cache;
  auto psnr = [&](std::size_t i, double q) {
    auto [it, inserted] = cache.try_emplace({i, q}, 0.0);
    if (inserted) it->second = probe(i, q);
    return it->second;
  };
  auto distance_of = [&](const std::vector<double>& grid) {
    std::vector<double> values;
    values.reserve(grid.size() * corpus_size);
    for (std::size_t i = 0; i < corpus_size; ++i) {
      for (double q : grid) values.push_back(psnr(i, q));
    }
    return earth_mover_distance(
        make_psnr_histogram(values, target.bin_width, target.origin), target);
  };

  std::vector<double> grid;
  if (codec.quality_grid.size() == grid_size) {
    grid = codec.quality_grid;
  } else {
    for (std::size_t k = 0; k < grid_size; ++k) {
      const double t = grid_size == 1 ? 0.5
                                      : static_cast<double>(k) / static_cast<double>(grid_size - 1);
      const auto idx = static_cast<std::size_t>(std::lround(t * static_cast<double>(candidates.size() - 1)));
      grid.push_back(candidates[idx]);
    }
  }

  CalibrationResult result;
  double best = distance_of(grid);
  for (int sweep = 0; sweep < 50 && best > 0; ++sweep) {
    bool changed = false;
    for (std::size_t c = 0; c < grid.size(); ++c) {
      double chosen = grid[c];
      for (double q : candidates) {
        if (q == grid[c] || std::find(grid.begin(), grid.end(), q) != grid.end()) continue;
        auto trial = grid;
        trial[c] = q;
        const double d = distance_of(trial);
        if (d < best) {
          best = d;
          chosen = q;
        }
      }
      if (chosen != grid[c]) {
        grid[c] = chosen;
        changed = true;
      }
    }
    if (!changed) break;
  }
  std::sort(grid.begin(), grid.end());

  // Reachability of the target bins at the ends of the quality range.
  double lowest = kPsnrCapDb;
  double highest = 0.0;
  for (std::size_t i = 0; i < corpus_size; ++i) {
    lowest = std::min(lowest, psnr(i, candidates.front()));
    highest = std::max(highest, psnr(i, candidates.back()));
  }
  for (const auto& [bin, weight] : target.weights) {
    if (weight <= 0) continue;
    const double centre = target.center(bin);
    std::string msg;
    if (centre + target.bin_width / 2 < lowest) {
      msg = "codec '" + codec.name + "' cannot compress hard enough to reach " +
            format_fixed(centre, 2) + " dB (lowest " + format_fixed(lowest, 2) + " dB)";
    } else if (centre - target.bin_width / 2 > highest) {
      msg = "codec '" + codec.name + "' cannot reach " + format_fixed(centre, 2) +
            " dB (highest " + format_fixed(highest, 2) + " dB)";
    }
    if (!msg.empty()) {
      log::warn(msg);
      result.warnings.push_back(std::move(msg));
    }
  }
  result.grid = std::move(grid);
  result.distance = best;
  return result;
}

CalibrationResult calibrate_quality_grid(std::span<const Image> corpus, const CodecSpec& codec,
                                         const PsnrHistogram& target, std::size_t grid_size) {
  auto probe = [&](std::size_t i, double q) {
    return compute_psnr(corpus[i], encode_decode(corpus[i], codec, q));
  };
  return calibrate_quality_grid(corpus.size(), probe, codec, target, grid_size);
}

PsnrHistogram measure_grid_histogram(std::span<const Image> corpus, const CodecSpec& codec,
                                     double bin_width) {
  std::vector<double> values;
  for (const auto& img : corpus) {
    for (double q : codec.quality_grid) values.push_back(compute_psnr(img, encode_decode(img, codec, q)));
  }
  return make_psnr_histogram(values, bin_width);
}

Image load_frame(const ImageRef& ref) { return load_image(ref.path); }

std::vector<LabeledFrame> autolabel_frames(std::span<const ImageRef> frames,
                                           const DetectorBackend& detector,
                                           double conf_threshold, std::size_t min_gap,
                                           const FrameLoader& loader) {
  std::vector<LabeledFrame> kept;
  std::optional<std::size_t> last;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (last && i - *last < min_gap) continue;
    std::vector<Detection> confident;
    for (auto& d : detector.detect(loader(frames[i]))) {
      if (d.confidence >= conf_threshold) confident.push_back(d);
    }
    if (confident.empty()) continue;
    LabeledFrame f;
    char id[32];
    std::snprintf(id, sizeof id, "f%06zu", i);
    f.source_id = id;
    f.source_path = frames[i].path.string();
    f.width = frames[i].width;
    f.height = frames[i].height;
    f.frame_index = i;
    f.gt = std::move(confident);
    kept.push_back(std::move(f));
    last = i;
  }
  return kept;
}

PixelRect padded_rect(const BoundingBox& box, double padding, int width, int height) {
  PixelRect r = unclipped_rect(box, padding);
  r.x0 = std::max(0, r.x0);
  r.y0 = std::max(0, r.y0);
  r.x1 = std::min(width, r.x1);
  r.y1 = std::min(height, r.y1);
  return r;
}

std::vector<std::size_t> dedup_plate_strings(std::span<const std::vector<std::string>> plates,
                                             std::size_t max_distance) {
  std::vector<std::size_t> kept;
  std::vector<std::string> seen;
  for (std::size_t i = 0; i < plates.size(); ++i) {
    if (plates[i].empty()) continue;
    bool distinct = true;
    for (const auto& s : plates[i]) {
      for (const auto& prev : seen) {
        if (levenshtein(s, prev) <= max_distance) {
          distinct = false;
          break;
        }
      }
      if (!distinct) break;
    }
    if (!distinct) continue;
    kept.push_back(i);
    seen.insert(seen.end(), plates[i].begin(), plates[i].end());
  }
  return kept;
}

std::vector<LabeledFrame> dedup_plate_frames(std::vector<LabeledFrame> frames,
                                             const PlateRecognizer& recognizer,
                                             std::size_t max_distance, double read_padding,
                                             const FrameLoader& loader) {
  const PlateAlphabet alphabet;
  std::vector<std::vector<std::string>> strings(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    auto& f = frames[i];
    const Image img = loader(ImageRef(f.source_path, f.width, f.height));
    std::vector<std::string> read;
    for (const auto& d : f.gt) {
      const auto r = padded_rect(d.box, read_padding, img.width, img.height);
      const PlateString s = recognizer.recognize(crop(img, r));
      if (s.confidence < 1.0 || s.chars.empty()) {
        read.clear();
        break;
      }
      read.push_back(alphabet.normalize(s.chars));
    }
    strings[i] = std::move(read);
  }
  std::vector<LabeledFrame> kept;
  for (std::size_t i : dedup_plate_strings(strings, max_distance)) {
    frames[i].plates = std::move(strings[i]);
    kept.push_back(std::move(frames[i]));
  }
  return kept;
}

FacePairSelection select_face_pairs(const std::map<std::string, std::vector<ImageRef>>& persons,
                                    const DetectorBackend& detector, std::uint64_t seed,
                                    const FrameLoader& loader) {
  FacePairSelection out;
  std::mt19937_64 rng(seed);
  for (const auto& [person, images] : persons) {
    if (images.size() < 2) {
      ++out.skipped_persons;
      continue;
    }
    std::vector<ImageRef> sorted = images;
    std::sort(sorted.begin(), sorted.end(),
              [](const ImageRef& a, const ImageRef& b) { return a.path.string() < b.path.string(); });
    std::size_t best = 0;
    double best_conf = -1.0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      double conf = 0.0;
      for (const auto& d : detector.detect(loader(sorted[k]))) conf = std::max(conf, d.confidence);
      if (conf > best_conf) {
        best_conf = conf;
        best = k;
      }
    }
    std::vector<std::size_t> others;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      if (k != best) others.push_back(k);
    }
    const auto pick = std::uniform_int_distribution<std::size_t>(0, others.size() - 1)(rng);
    out.pairs.push_back({person, sorted[best], sorted[others[pick]]});
  }
  if (out.skipped_persons > 0) {
    log::info(std::to_string(out.skipped_persons) + " person(s) with fewer than 2 images skipped");
  }
  return out;
}

fs::path resolve_path(const fs::path& base_dir, const std::string& p) {
  fs::path path(p);
  if (path.is_absolute() || base_dir.empty()) return path;
  return base_dir / path;
}

std::vector<CropSet> extract_crops(const LabeledFrame& frame, double padding_fraction,
                                   const fs::path& base_dir, const FrameLoader& loader) {
  if (padding_fraction < 0) throw InvalidArgument("padding fraction must be >= 0");
  const Image source =
      loader(ImageRef(resolve_path(base_dir, frame.source_path), frame.width, frame.height));
  std::vector<Image> variants;
  variants.reserve(frame.variants.size());
  for (const auto& v : frame.variants) {
    Image img = loader(ImageRef(resolve_path(base_dir, v.path), frame.width, frame.height));
    if (img.width != source.width || img.height != source.height) {
      throw DecodeError("variant " + v.path + " does not match its source size");
    }
    variants.push_back(std::move(img));
  }
  std::vector<CropSet> out;
  for (std::size_t k = 0; k < frame.gt.size(); ++k) {
    const auto& box = frame.gt[k].box;
    CropSet cs;
    cs.object_id = k;
    cs.rect = padded_rect(box, padding_fraction, source.width, source.height);
    cs.clipped = cs.rect != unclipped_rect(box, padding_fraction);
    if (cs.rect.width() <= 0 || cs.rect.height() <= 0) {
      log::warn("frame " + frame.source_id + " object " + std::to_string(k) +
                ": box outside the image, skipped");
      continue;
    }
    if (cs.clipped) {
      log::debug("frame " + frame.source_id + " object " + std::to_string(k) +
                ": crop clipped to [" + std::to_string(cs.rect.x0) + "," +
                std::to_string(cs.rect.y0) + "," + std::to_string(cs.rect.x1) + "," +
                std::to_string(cs.rect.y1) + ")");
    }
    cs.ref_crop = crop(source, cs.rect);
    for (const auto& v : variants) cs.variant_crops.push_back(crop(v, cs.rect));
    out.push_back(std::move(cs));
  }
  return out;
}

}  // namespace mvqa
