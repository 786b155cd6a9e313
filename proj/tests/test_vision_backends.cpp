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

#include <algorithm>
#include <vector>
#include <random>

#include <gtest/gtest.h>

#include "mvqa/dataset_pipeline.hpp"
#include "mvqa/image.hpp"
#include "mvqa/synthetic.hpp"
#include "mvqa/vision_backends.hpp"

using namespace mvqa;

namespace {

Image card() { return synthetic::rectangle_card(100, 80, BoundingBox(10, 10, 50, 50), 230); }

}  // namespace

TEST(SyntheticDetector, RectangleBlankAndNoise) {
  const SyntheticDetector det;
  const auto clean = det.detect(card());
  ASSERT_EQ(clean.size(), 1u);
  EXPECT_EQ(clean[0].box, BoundingBox(10, 10, 50, 50));
  EXPECT_EQ(clean[0].confidence, 1.0);

  EXPECT_TRUE(det.detect(Image(100, 80, 3, synthetic::kBackground)).empty());

  const auto noisy = det.detect(synthetic::add_noise(card(), 40.0, 7));
  ASSERT_FALSE(noisy.empty());
  double best = 0.0;
  for (const auto& d : noisy) best = std::max(best, d.confidence);
  EXPECT_LT(best, clean[0].confidence);
}

TEST(SyntheticDetector, BoxesInsideImageAndDeterministic) {
  const SyntheticDetector det;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto scene = synthetic::object_scene(s);
    const auto a = det.detect(scene.image);
    EXPECT_EQ(a, det.detect(scene.image));
    EXPECT_EQ(a.size(), scene.boxes.size());
    for (const auto& d : a) {
      EXPECT_LE(d.box.x_max(), scene.image.width);
      EXPECT_LE(d.box.y_max(), scene.image.height);
    }
  }
}

namespace {

double card_confidence(const Image& card, const BoundingBox& box, double q) {
  double conf = 0.0;  // a lost card counts as confidence 0
  for (const auto& d : SyntheticDetector().detect(encode_decode(card, jpeg_codec(), q))) {
    if (iou(d.box, box) >= 0.5) conf = std::max(conf, d.confidence);
  }
  return conf;
}

}  // namespace

TEST(SyntheticDetector, ConfidenceMonotoneOnTestCard) {
  const std::vector<double> grid{10, 30, 50, 70, 90};
  const BoundingBox box(10, 10, 50, 50);
  for (int fill : {0, 30, 220, 255}) {
    const auto card = synthetic::rectangle_card(100, 80, box, static_cast<std::uint8_t>(fill));
    double prev = 0.0;
    for (double q : grid) {
      const double conf = card_confidence(card, box, q);
      EXPECT_GE(conf, prev) << "fill " << fill << " q" << q;
      prev = conf;
    }
  }
}

// libjpeg output is not itself monotone in quality for a given image, so for
// arbitrary cards only near-monotonicity on the grid and the trend hold.
TEST(SyntheticDetector, ConfidenceTrendsUpWithQuality) {
  std::mt19937_64 rng(12);
  std::vector<double> mean(19, 0.0);
  for (int trial = 0; trial < 40; ++trial) {
    const int x0 = 5 + int(rng() % 20), y0 = 5 + int(rng() % 15);
    const BoundingBox box(x0, y0, x0 + 20 + int(rng() % 30), y0 + 15 + int(rng() % 25));
    const auto fill = static_cast<std::uint8_t>(trial % 2 ? 200 + rng() % 56 : rng() % 50);
    const auto card = synthetic::rectangle_card(100, 80, box, fill);
    double prev = 0.0;
    for (double q : {10.0, 30.0, 50.0, 70.0, 90.0}) {
      const double conf = card_confidence(card, box, q);
      EXPECT_GE(conf, prev - 1e-3) << "trial " << trial << " q" << q;
      prev = conf;
    }
    for (int i = 0; i < 19; ++i) mean[i] += card_confidence(card, box, 5.0 * (i + 1)) / 40;
  }
  for (int i = 1; i < 19; ++i) EXPECT_GE(mean[i], mean[i - 1]) << "q" << 5 * (i + 1);
}

TEST(SyntheticEmbedder, DeterministicAndLipschitz) {
  const SyntheticEmbedder e;
  const auto img = synthetic::face_image(3, 0);
  const auto a = e.embed(img);
  EXPECT_EQ(a, e.embed(img));
  EXPECT_EQ(a.size(), e.dimension());

  auto other = img;
  other.at(40, 40, 0) = static_cast<std::uint8_t>(255 - other.at(40, 40, 0));
  const auto b = e.embed(other);
  // |P x - P y| <= |P|_2 |x - y| on the pooled vectors.
  const Eigen::VectorXd d = e.pooled(img) - e.pooled(other);
  const double op_norm = Eigen::JacobiSVD<Eigen::MatrixXd>(e.projection()).singularValues()(0);
  Eigen::VectorXd va = Eigen::Map<const Eigen::VectorXd>(a.values().data(), a.size());
  Eigen::VectorXd vb = Eigen::Map<const Eigen::VectorXd>(b.values().data(), b.size());
  EXPECT_LE(std::abs(va.norm() - vb.norm()), op_norm * d.norm() + 1e-12);
  EXPECT_LE((va - vb).norm(), op_norm * d.norm() + 1e-12);
}

TEST(SyntheticEmbedder, ZeroImageRejected) {
  const SyntheticEmbedder e;
  EXPECT_THROW(e.embed(Image(112, 112, 3, 0)), InvalidEmbedding);
}

TEST(SyntheticRecognizer, CleanBlurredBlank) {
  const SyntheticPlateRecognizer rec;
  const auto plate = synthetic::render_plate("AB123", 2);
  const auto clean = rec.recognize(plate);
  EXPECT_EQ(clean.chars, "AB123");
  EXPECT_EQ(clean.confidence, 1.0);

  const auto blurred = rec.recognize(box_blur(plate, 3));
  EXPECT_TRUE(blurred.chars != "AB123" || blurred.confidence < 1.0);
  EXPECT_LT(blurred.confidence, 1.0);

  const auto blank = rec.recognize(Image(60, 30, 3, 50));
  EXPECT_EQ(blank.chars, "");
  EXPECT_EQ(blank.confidence, 0.0);
}

TEST(SyntheticRecognizer, OutputsWithinAlphabet) {
  const SyntheticPlateRecognizer rec;
  std::mt19937_64 rng(41);
  for (int i = 0; i < 30; ++i) {
    const auto scene = synthetic::plate_scene(i);
    const auto noisy = synthetic::add_noise(scene.image, 30.0, rng());
    for (const auto& b : scene.boxes) {
      const auto r = rec.recognize(crop(noisy, padded_rect(b, 0.1, noisy.width, noisy.height)));
      for (char c : r.chars) EXPECT_TRUE(rec.alphabet().contains(c));
      EXPECT_GE(r.confidence, 0.0);
      EXPECT_LE(r.confidence, 1.0);
    }
  }
}

TEST(Backends, Factory) {
  EXPECT_NO_THROW(make_detector("synthetic", Task::kPlate));
  EXPECT_THROW(make_detector("yolo", Task::kObject), ConfigError);
  EXPECT_THROW(make_embedder("arcface"), ConfigError);
  EXPECT_THROW(make_recognizer("lprnet"), ConfigError);
  EXPECT_EQ(task_from_string("face"), Task::kFace);
  EXPECT_THROW(task_from_string("segmentation"), Error);
}
