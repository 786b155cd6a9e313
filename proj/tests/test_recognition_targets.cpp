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

#include <random>

#include <gtest/gtest.h>

#include "mvqa/recognition_targets.hpp"
#include "mvqa/synthetic.hpp"
#include "mvqa/vision_backends.hpp"
#include "oracles.hpp"

using namespace mvqa;

namespace {

// Returns fixed embeddings keyed by the image's first pixel.
class StubEmbedder final : public FaceEmbedder {
 public:
  explicit StubEmbedder(std::vector<std::vector<double>> table) : table_(std::move(table)) {}
  std::string name() const override { return "stub"; }
  std::size_t dimension() const override { return table_.front().size(); }
  EmbeddingVector embed(const Image& image) const override {
    return EmbeddingVector(table_.at(image.data[0]));
  }

 private:
  std::vector<std::vector<double>> table_;
};

Image tagged(std::uint8_t tag) { return Image(2, 2, 1, tag); }

}  // namespace

TEST(Jaro, GoldenValues) {
  EXPECT_EQ(jaro_similarity("ABC", "ABC"), 1.0);
  EXPECT_EQ(jaro_similarity("ABC", "XYZ"), 0.0);
  // m = 6, t = 1: (6/6 + 6/6 + 5/6) / 3.
  EXPECT_NEAR(jaro_similarity("MARTHA", "MARHTA"), 17.0 / 18.0, 1e-15);
  EXPECT_EQ(jaro_similarity("", ""), 0.0);
  EXPECT_EQ(jaro_similarity("", "A"), 0.0);
}

TEST(Jaro, AgreesWithOracleAndProperties) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 5000; ++i) {
    const auto a = oracle::random_string(rng, "ABC12", 6);
    const auto b = oracle::random_string(rng, "ABC12", 6);
    const double j = jaro_similarity(a, b);
    EXPECT_NEAR(j, oracle::jaro(a, b), 1e-12) << a << " / " << b;
    EXPECT_NEAR(j, jaro_similarity(b, a), 1e-12);
    EXPECT_GE(j, 0.0);
    EXPECT_LE(j, 1.0);
    EXPECT_EQ(j == 1.0, a == b && !a.empty()) << a << " / " << b;
  }
}

TEST(PlateFrameScore, Examples) {
  const std::vector<PlatePair> one{{PlateString("AB123", 1), PlateString("AB123", 1)}};
  EXPECT_EQ(plate_frame_score(one).value(), 1.0);
  const std::vector<PlatePair> two{{PlateString("ABC", 1), PlateString("ABC", 1)},
                                   {PlateString("ABC", 1), PlateString("XYZ", 1)}};
  EXPECT_EQ(plate_frame_score(two).value(), 0.5);
  EXPECT_FALSE(plate_frame_score({}).has_value());
  const auto rec = make_plate_record("f000003", 1, PlateString("MARTHA", 1), PlateString("MARHTA", 0.9));
  EXPECT_NEAR(rec.jaro, 17.0 / 18.0, 1e-15);
}

TEST(Levenshtein, ExamplesOracleAndMetricProperties) {
  EXPECT_EQ(levenshtein("AB123", "AB123"), 0u);
  EXPECT_EQ(levenshtein("", "ABC"), 3u);
  EXPECT_EQ(levenshtein("KITTEN", "SITTING"), 3u);
  std::mt19937_64 rng(32);
  for (int i = 0; i < 3000; ++i) {
    const auto a = oracle::random_string(rng, "AB1", 6);
    const auto b = oracle::random_string(rng, "AB1", 6);
    const auto c = oracle::random_string(rng, "AB1", 6);
    const auto ab = levenshtein(a, b);
    EXPECT_EQ(ab, oracle::levenshtein(a, b));
    EXPECT_EQ(ab, levenshtein(b, a));
    EXPECT_LE(levenshtein(a, c), ab + levenshtein(b, c));
    const auto diff = a.size() > b.size() ? a.size() - b.size() : b.size() - a.size();
    EXPECT_GE(ab, diff);
  }
}

TEST(FaceSimilarity, Examples) {
  const StubEmbedder e({{1, 0}, {0, 1}, {1, 1}});
  EXPECT_EQ(face_similarity(tagged(0), tagged(0), e), 1.0);
  EXPECT_EQ(face_similarity(tagged(0), tagged(1), e), 0.0);
  EXPECT_NEAR(face_similarity(tagged(2), tagged(0), e), 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(FaceDelta, Examples) {
  // Database (1, 0); ref/compr chosen so the cosines are 0.9 / 0.7 and 0.5 / 0.6.
  auto unit = [](double c) { return std::vector<double>{c, std::sqrt(1 - c * c)}; };
  const StubEmbedder e({{1, 0}, unit(0.9), unit(0.7), unit(0.5), unit(0.6)});
  EXPECT_NEAR(face_delta(tagged(1), tagged(2), tagged(0), e), 0.2, 1e-12);
  EXPECT_NEAR(face_delta(tagged(3), tagged(4), tagged(0), e), -0.1, 1e-12);
  EXPECT_EQ(face_delta(tagged(1), tagged(1), tagged(0), e), 0.0);
  const auto rec = make_face_record("p1", "db.ppm", "q.ppm", "q_jpeg_30.jpg", 0.9, 0.7);
  EXPECT_NEAR(rec.f_delta, 0.2, 1e-15);
}

TEST(FaceDelta, IdentityAndAntisymmetry) {
  const SyntheticEmbedder e;
  std::mt19937_64 rng(33);
  for (int i = 0; i < 200; ++i) {
    const auto db = synthetic::face_image(rng() % 50, 0, 48);
    const auto a = synthetic::face_image(rng() % 50, 1 + rng() % 3, 48);
    const auto b = synthetic::add_noise(a, 20.0, rng());
    EXPECT_EQ(face_delta(a, a, db, e), 0.0);
    EXPECT_NEAR(face_delta(a, b, db, e), -face_delta(b, a, db, e), 1e-12);
  }
}

TEST(PlateJaro, NormalizesBeforeComparing) {
  EXPECT_EQ(plate_jaro("ab-123", "AB123"), 1.0);
  EXPECT_EQ(plate_jaro("AB 123", "ab123"), 1.0);
  EXPECT_EQ(plate_jaro("xyz", "ABC"), 0.0);
  EXPECT_EQ(plate_jaro("ab", "ab", PlateAlphabet("AB")), 1.0);
  EXPECT_EQ(make_plate_record("f", 0, PlateString("AB12", 1.0), PlateString("ab12", 0.9)).jaro, 1.0);
}
