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

#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "mvqa/dataset_pipeline.hpp"
#include "mvqa/io_util.hpp"
#include "mvqa/synthetic.hpp"
#include "tmpdir.hpp"

using namespace mvqa;

namespace {

Image gradient(int w = 64, int h = 48) {
  Image img(w, h, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.at(x, y, 0) = static_cast<std::uint8_t>(x * 255 / (w - 1));
      img.at(x, y, 1) = static_cast<std::uint8_t>(y * 255 / (h - 1));
      img.at(x, y, 2) = 128;
    }
  }
  return img;
}

// Always reports one box whose confidence is the image's first byte / 255.
class ByteDetector final : public DetectorBackend {
 public:
  std::string name() const override { return "byte"; }
  Task task() const override { return Task::kObject; }
  using DetectorBackend::detect;
  std::vector<Detection> detect(const Image& img) const override {
    return {Detection(BoundingBox(0, 0, 1, 1), 0, img.data[0] / 255.0)};
  }
};

// Reads the plate string stored under the image's first byte.
class TableRecognizer final : public PlateRecognizer {
 public:
  explicit TableRecognizer(std::vector<PlateString> t) : table_(std::move(t)) {}
  std::string name() const override { return "table"; }
  const PlateAlphabet& alphabet() const override { return alpha_; }
  PlateString recognize(const Image& img) const override { return table_.at(img.data[0]); }

 private:
  std::vector<PlateString> table_;
  PlateAlphabet alpha_;
};

}  // namespace

TEST(Codec, Validation) {
  EXPECT_NO_THROW(validate_codec(jpeg_codec()));
  EXPECT_THROW(validate_codec(jpeg_codec({})), InvalidArgument);
  EXPECT_THROW(validate_codec(jpeg_codec({50, 10})), InvalidArgument);
  EXPECT_THROW(validate_codec(jpeg_codec({0, 10})), InvalidArgument);
}

TEST(Codec, JpegQualityOrdering) {
  const auto img = gradient();
  const auto q100 = encode_decode(img, jpeg_codec(), 100);
  EXPECT_EQ(q100.width, img.width);
  EXPECT_EQ(q100.height, img.height);
  EXPECT_GT(compute_psnr(img, q100), 40.0);
  const auto scene = synthetic::object_scene(5).image;
  EXPECT_LT(compute_psnr(scene, encode_decode(scene, jpeg_codec(), 10)),
            compute_psnr(scene, encode_decode(scene, jpeg_codec(), 90)));
}

TEST(Codec, ExternalTemplateAndMissingBinary) {
  ScratchDir dir;
  CodecSpec copy;
  copy.name = "copy";
  copy.encode_command = "cp {input} {output}";
  copy.decode_command = "cp {input} {output}";
  copy.quality_grid = {1};
  const auto img = gradient();
  EXPECT_EQ(encode_decode(img, copy, 1, dir / "logs"), img);
  EXPECT_TRUE(std::filesystem::exists(dir / "logs" / "copy_1.log"));

  CodecSpec missing = copy;
  missing.encode_command = "mvqa-no-such-encoder {input} {output} {qf}";
  try {
    encode_decode(img, missing, 1);
    FAIL() << "expected EncoderError";
  } catch (const EncoderError& e) {
    EXPECT_NE(e.diagnostics().find("mvqa-no-such-encoder"), std::string::npos);
  }
  CodecSpec failing = copy;
  failing.encode_command = "false {input} {output}";
  EXPECT_THROW(encode_decode(img, failing, 1), EncoderError);
}

TEST(Codec, EncodeVariantWritesDecodableFile) {
  ScratchDir dir;
  const auto img = synthetic::object_scene(1).image;
  save_image(img, dir / "src.ppm");
  const ImageRef src(dir / "src.ppm", img.width, img.height);
  const auto v = encode_variant(src, jpeg_codec(), 30, dir / "out" / "jpeg_30.jpg");
  EXPECT_EQ(v.width, img.width);
  const auto back = load_image(dir / "out" / "jpeg_30.jpg");
  EXPECT_EQ(back, encode_decode(img, jpeg_codec(), 30));
}

TEST(Psnr, Examples) {
  Image a(16, 16, 1, 100);
  EXPECT_EQ(compute_psnr(a, a), kPsnrCapDb);
  EXPECT_EQ(compute_psnr(Image(8, 8, 1, 0), Image(8, 8, 1, 255)), 0.0);
  Image b = a;
  b.at(3, 4) = 116;
  EXPECT_NEAR(compute_psnr(a, b), 20.0 * std::log10(255.0), 1e-12);
  EXPECT_NEAR(compute_psnr(a, b), 48.13, 0.005);
  EXPECT_THROW(compute_psnr(a, Image(16, 15, 1)), InvalidArgument);
  EXPECT_THROW(compute_psnr(a, Image(16, 16, 3)), InvalidArgument);
}

TEST(Histogram, EarthMover) {
  const std::vector<double> p{20.2, 19.9, 40.1};
  const auto h = make_psnr_histogram(p);
  EXPECT_NEAR(h.weights.at(20), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(h.weights.at(40), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(earth_mover_distance(h, h), 0.0);
  const std::vector<double> q{21, 21, 40};
  // Two thirds of the mass moves one bin.
  EXPECT_NEAR(earth_mover_distance(h, make_psnr_histogram(q)), 2.0 / 3.0, 1e-12);
  EXPECT_THROW(earth_mover_distance(h, make_psnr_histogram(q, 2.0)), InvalidArgument);
}

TEST(Calibration, PsnrEqualsQuality) {
  CodecSpec c;
  c.name = "ideal";
  c.encode_command = "unused";
  c.decode_command = "unused";
  const PsnrProbe probe = [](std::size_t, double qf) { return qf; };
  const std::vector<double> target{20, 20, 40, 40};
  const auto r = calibrate_quality_grid(2, probe, c, make_psnr_histogram(target), 2);
  EXPECT_EQ(r.grid, (std::vector<double>{20, 40}));
  EXPECT_EQ(r.distance, 0.0);
}

TEST(Calibration, JpegAgainstItselfIsAFixedPoint) {
  std::vector<Image> corpus;
  for (std::uint64_t s = 0; s < 4; ++s) corpus.push_back(synthetic::object_scene(s, 64, 48).image);
  const auto codec = jpeg_codec();
  const auto own = measure_grid_histogram(corpus, codec);
  const auto r = calibrate_quality_grid(corpus, codec, own, codec.quality_grid.size());
  EXPECT_EQ(r.grid, codec.quality_grid);
  EXPECT_EQ(r.distance, 0.0);
}

TEST(Sweep, PsnrMonotoneInJpegQuality) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto img = synthetic::object_scene(s).image;
    double prev = 0.0;
    for (double q : jpeg_codec().quality_grid) {
      const double p = compute_psnr(img, encode_decode(img, jpeg_codec(), q));
      EXPECT_GE(p, prev) << "scene " << s << " q" << q;
      prev = p;
    }
  }
}

TEST(Autolabel, MinGapSpacing) {
  std::vector<ImageRef> frames;
  for (int i = 0; i < 500; ++i) frames.emplace_back("frame" + std::to_string(i), 4, 4);
  const ByteDetector det;
  const FrameLoader bright = [](const ImageRef&) { return Image(4, 4, 1, 255); };
  const auto kept = autolabel_frames(frames, det, 0.7, 100, bright);
  ASSERT_EQ(kept.size(), 5u);
  for (std::size_t k = 0; k < kept.size(); ++k) EXPECT_EQ(kept[k].frame_index, 100 * k);
  EXPECT_EQ(kept[1].source_id, "f000100");

  const FrameLoader dim = [](const ImageRef&) { return Image(4, 4, 1, 100); };
  EXPECT_TRUE(autolabel_frames(frames, det, 0.7, 100, dim).empty());
}

TEST(Autolabel, GapCountsFromLastKeptFrame) {
  std::vector<ImageRef> frames;
  for (int i = 0; i < 10; ++i) frames.emplace_back(std::to_string(i), 4, 4);
  const ByteDetector det;
  // Only frames 0, 1 and 5.. are confident.
  const FrameLoader loader = [](const ImageRef& r) {
    const int i = std::stoi(r.path.string());
    return Image(4, 4, 1, (i < 2 || i >= 5) ? 255 : 0);
  };
  const auto kept = autolabel_frames(frames, det, 0.5, 3, loader);
  std::vector<std::size_t> idx;
  for (const auto& f : kept) idx.push_back(f.frame_index);
  EXPECT_EQ(idx, (std::vector<std::size_t>{0, 5, 8}));
}

TEST(PlateDedup, Strings) {
  using V = std::vector<std::vector<std::string>>;
  EXPECT_EQ(dedup_plate_strings(V{{"AB123"}, {"AB123"}}, 1), std::vector<std::size_t>{0});
  EXPECT_EQ(dedup_plate_strings(V{{"AB123"}, {"AB124"}}, 1), std::vector<std::size_t>{0});
  EXPECT_EQ(dedup_plate_strings(V{{"AB123"}, {"XY987"}}, 1), (std::vector<std::size_t>{0, 1}));
}

TEST(PlateDedup, FramesNeedConfidentReads) {
  std::vector<LabeledFrame> frames(3);
  for (std::size_t i = 0; i < 3; ++i) {
    frames[i].source_id = "s" + std::to_string(i);
    frames[i].source_path = std::to_string(i);
    frames[i].width = frames[i].height = 8;
    frames[i].gt.emplace_back(BoundingBox(1, 1, 6, 6), 0, 1.0);
  }
  const TableRecognizer rec({PlateString("AB123", 1.0), PlateString("XY987", 0.8),
                             PlateString("XY987", 1.0)});
  const FrameLoader loader = [](const ImageRef& r) {
    return Image(8, 8, 1, static_cast<std::uint8_t>(std::stoi(r.path.string())));
  };
  const auto kept = dedup_plate_frames(frames, rec, 1, 0.1, loader);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].plates, std::vector<std::string>{"AB123"});
  EXPECT_EQ(kept[1].source_id, "s2");
}

TEST(FacePairs, SelectionRules) {
  const ByteDetector det;
  std::map<std::string, std::uint8_t> conf{{"a/1", 230}, {"a/2", 204}, {"b/1", 100},
                                           {"b/2", 100}, {"b/3", 50},  {"c/1", 255}};
  const FrameLoader loader = [&](const ImageRef& r) { return Image(2, 2, 1, conf.at(r.path.string())); };
  std::map<std::string, std::vector<ImageRef>> persons;
  persons["a"] = {ImageRef("a/2", 2, 2), ImageRef("a/1", 2, 2)};
  persons["b"] = {ImageRef("b/3", 2, 2), ImageRef("b/2", 2, 2), ImageRef("b/1", 2, 2)};
  persons["c"] = {ImageRef("c/1", 2, 2)};
  const auto sel = select_face_pairs(persons, det, 5, loader);
  EXPECT_EQ(sel.skipped_persons, 1u);
  ASSERT_EQ(sel.pairs.size(), 2u);
  EXPECT_EQ(sel.pairs[0].database.path, "a/1");
  EXPECT_EQ(sel.pairs[0].query.path, "a/2");
  EXPECT_EQ(sel.pairs[1].database.path, "b/1");
  EXPECT_NE(sel.pairs[1].query.path, "b/1");
  const auto again = select_face_pairs(persons, det, 5, loader);
  EXPECT_EQ(again.pairs[1].query, sel.pairs[1].query);
}

TEST(Crops, PaddingAlignmentAndClipping) {
  ScratchDir dir;
  const auto img = synthetic::object_scene(2, 64, 48).image;
  save_image(img, dir / "src.ppm");
  LabeledFrame f;
  f.source_id = "s0";
  f.source_path = "src.ppm";
  f.width = 64;
  f.height = 48;
  f.gt.emplace_back(BoundingBox(10, 10, 20, 20), 0, 1.0);
  f.gt.emplace_back(BoundingBox(0, 0, 10, 10), 0, 1.0);
  for (double q : {10.0, 50.0}) {
    const std::string name = "v" + format_quality(q) + ".jpg";
    encode_variant(ImageRef(dir / "src.ppm", 64, 48), jpeg_codec(), q, dir / name);
    f.variants.push_back({"jpeg", q, name, 0.0});
  }
  const auto none = extract_crops(f, 0.0, dir.path());
  ASSERT_EQ(none.size(), 2u);
  EXPECT_EQ(none[0].ref_crop.width, 10);
  EXPECT_EQ(none[0].ref_crop.height, 10);
  const auto padded = extract_crops(f, 0.1, dir.path());
  EXPECT_EQ(padded[0].ref_crop.width, 12);
  EXPECT_EQ(padded[0].ref_crop.height, 12);
  EXPECT_FALSE(padded[0].clipped);
  EXPECT_EQ(padded[0].rect.x0, 9);
  // The corner box loses its top-left padding.
  EXPECT_TRUE(padded[1].clipped);
  EXPECT_EQ(padded[1].rect.x0, 0);
  EXPECT_EQ(padded[1].ref_crop.width, 11);
  for (const auto& c : padded) {
    ASSERT_EQ(c.variant_crops.size(), 2u);
    for (const auto& v : c.variant_crops) {
      EXPECT_EQ(v.width, c.ref_crop.width);
      EXPECT_EQ(v.height, c.ref_crop.height);
    }
  }
  // The variant crop is the same window of the decoded variant.
  EXPECT_EQ(padded[0].variant_crops[1], crop(load_image(dir / "v50.jpg"), padded[0].rect));
}
