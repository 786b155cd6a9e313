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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mvqa/core_types.hpp"

namespace mvqa {

inline constexpr int kManifestSchemaVersion = 1;
// PSNR reported for identical images (MSE = 0).
inline constexpr double kPsnrCapDb = 100.0;

struct Variant {
  std::string codec;
  double quality_factor = 0.0;
  std::string path;  // relative to the manifest's base directory unless absolute
  double psnr_db = 0.0;

  friend bool operator==(const Variant&, const Variant&) = default;
};

// One source image with its ground truth and compressed variants.
struct LabeledFrame {
  std::string source_id;
  std::string source_path;
  int width = 0;
  int height = 0;
  std::size_t frame_index = 0;
  std::vector<Detection> gt;
  // Plate task: GT string per entry of `gt`.
  std::vector<std::string> plates;
  std::vector<Variant> variants;
  std::string split = "unassigned";
  // Face task: person identity and the database image of that person.
  std::string person_id;
  std::string database_path;
};

struct Manifest {
  int schema_version = kManifestSchemaVersion;
  std::string task;
  std::uint64_t seed = 0;
  std::vector<LabeledFrame> frames;
};

// One JSON object per line: schema_version, task, seed, source_id,
// source_path, width, height, frame_index, gt[{box, class_id, confidence,
// plate?}], variants[{codec, qf, path, psnr_db}], split, person_id?,
// database_path?.
std::string manifest_to_jsonl(const Manifest& m);
Manifest manifest_from_jsonl(std::string_view text);
void write_manifest(const Manifest& m, const std::filesystem::path& path);
// Throws SchemaError naming both versions on a schema mismatch.
Manifest read_manifest(const std::filesystem::path& path);

// Throws if any source_id appears with more than one split label.
void check_split_hygiene(const Manifest& m);

// Renders a quality factor for file names: integers without a decimal point.
std::string format_quality(double qf);

}  // namespace mvqa
