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

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "mvqa/core_types.hpp"
#include "mvqa/image.hpp"

namespace mvqa {

class FaceEmbedder;

// Jaro similarity with the standard floor(max(|s1|,|s2|)/2) - 1 window.
// Two empty strings score 0 (no matching characters).
double jaro_similarity(std::string_view s1, std::string_view s2);
inline double jaro_similarity(const PlateString& a, const PlateString& b) {
  return jaro_similarity(a.chars, b.chars);
}

// Jaro on plate strings after `alphabet.normalize` (upper-case, foreign
// characters dropped). Transformations are logged at debug level.
double plate_jaro(std::string_view gt, std::string_view recognized,
                  const PlateAlphabet& alphabet = PlateAlphabet());

// Minimum number of single-character insertions, deletions and substitutions.
std::size_t levenshtein(std::string_view s1, std::string_view s2);
inline std::size_t levenshtein(const PlateString& a, const PlateString& b) {
  return levenshtein(a.chars, b.chars);
}

using PlatePair = std::pair<PlateString, PlateString>;  // (gt, recognized)

// Mean Jaro similarity over matched plates; nullopt when nothing was matched.
std::optional<double> plate_frame_score(std::span<const PlatePair> matched_plates);

// Cosine similarity of the two images' embeddings.
double face_similarity(const Image& a, const Image& b, const FaceEmbedder& embedder);

// sim(ref, database) - sim(compr, database). Not clamped.
double face_delta(const Image& ref, const Image& compr, const Image& database,
                  const FaceEmbedder& embedder);

struct FacePairRecord {
  std::string person_id;
  std::string database_image;
  std::string reference_query;
  std::string compressed_query;
  double r_ref;
  double r_compr;
  double f_delta;
};

FacePairRecord make_face_record(std::string person_id, std::string database_image,
                                std::string reference_query, std::string compressed_query,
                                double r_ref, double r_compr);

struct PlateTargetRecord {
  std::string frame_id;
  std::size_t plate_id;
  PlateString gt_string;
  PlateString recognized_string;
  double jaro;
};

PlateTargetRecord make_plate_record(std::string frame_id, std::size_t plate_id, PlateString gt,
                                    PlateString recognized);

}  // namespace mvqa
