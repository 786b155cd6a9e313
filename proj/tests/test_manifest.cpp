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

#include <gtest/gtest.h>

#include "mvqa/io_util.hpp"
#include "mvqa/manifest.hpp"
#include "tmpdir.hpp"

using namespace mvqa;

namespace {

Manifest sample() {
  Manifest m;
  m.task = "plate";
  m.seed = 99;
  LabeledFrame f;
  f.source_id = "s0001";
  f.source_path = "sources/s0001.ppm";
  f.width = 160;
  f.height = 120;
  f.frame_index = 1;
  f.gt.emplace_back(BoundingBox(10.5, 20, 70, 42), 0, 0.875);
  f.plates.push_back("AB123");
  f.variants.push_back({"jpeg", 10, "corpus/plate/s0001/jpeg_10.jpg", 27.125});
  f.variants.push_back({"x265", 22.5, "corpus/plate/s0001/x265_22.5.ppm", 100});
  f.split = "val";
  m.frames.push_back(f);
  LabeledFrame g;
  g.source_id = "p001_s1";
  g.source_path = "/abs/p001_s1.ppm";
  g.width = g.height = 112;
  g.person_id = "p001";
  g.database_path = "/abs/p001_s0.ppm";
  m.frames.push_back(g);
  return m;
}

}  // namespace

TEST(Manifest, RoundTrip) {
  const auto m = sample();
  const auto text = manifest_to_jsonl(m);
  const auto back = manifest_from_jsonl(text);
  EXPECT_EQ(back.task, m.task);
  EXPECT_EQ(back.seed, m.seed);
  ASSERT_EQ(back.frames.size(), 2u);
  EXPECT_EQ(back.frames[0].gt, m.frames[0].gt);
  EXPECT_EQ(back.frames[0].plates, m.frames[0].plates);
  EXPECT_EQ(back.frames[0].variants, m.frames[0].variants);
  EXPECT_EQ(back.frames[0].split, "val");
  EXPECT_EQ(back.frames[1].database_path, m.frames[1].database_path);
  EXPECT_EQ(manifest_to_jsonl(back), text);
}

TEST(Manifest, SeedOnEveryLine) {
  const auto text = manifest_to_jsonl(sample());
  std::size_t lines = 0, pos = 0;
  while ((pos = text.find('\n', pos)) != std::string::npos) {
    ++lines;
    ++pos;
  }
  EXPECT_EQ(lines, 2u);
  std::size_t seeds = 0;
  for (pos = 0; (pos = text.find("\"seed\":99", pos)) != std::string::npos; ++pos) ++seeds;
  EXPECT_EQ(seeds, 2u);
}

TEST(Manifest, SchemaMismatchNamesBothVersions) {
  ScratchDir dir;
  auto text = manifest_to_jsonl(sample());
  const std::string from = "\"schema_version\":1";
  for (std::size_t p; (p = text.find(from)) != std::string::npos;) {
    text.replace(p, from.size(), "\"schema_version\":7");
  }
  write_file_atomic(dir / "m.jsonl", text);
  try {
    read_manifest(dir / "m.jsonl");
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find('7'), std::string::npos) << what;
    EXPECT_NE(what.find('1'), std::string::npos) << what;
  }
}

TEST(Manifest, WriteReadFile) {
  ScratchDir dir;
  const auto m = sample();
  write_manifest(m, dir / "a" / "m.jsonl");
  EXPECT_EQ(manifest_to_jsonl(read_manifest(dir / "a" / "m.jsonl")), manifest_to_jsonl(m));
}

TEST(Manifest, SplitHygiene) {
  auto m = sample();
  EXPECT_NO_THROW(check_split_hygiene(m));
  m.frames.push_back(m.frames[0]);
  m.frames.back().split = "train";
  EXPECT_THROW(check_split_hygiene(m), Error);
}

TEST(Manifest, FormatQuality) {
  EXPECT_EQ(format_quality(30), "30");
  EXPECT_EQ(format_quality(22.5), "22.5");
}
