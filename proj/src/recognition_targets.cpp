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

#include "mvqa/recognition_targets.hpp"

#include <algorithm>
#include <vector>

#include "mvqa/log.hpp"
#include "mvqa/vision_backends.hpp"

namespace mvqa {

double jaro_similarity(std::string_view s1, std::string_view s2) {
  const std::size_t n1 = s1.size();
  const std::size_t n2 = s2.size();
  if (n1 == 0 || n2 == 0) return 0.0;
  const std::size_t longest = std::max(n1, n2);
  const std::size_t window = longest / 2 >= 1 ? longest / 2 - 1 : 0;

  std::vector<bool> used1(n1, false);
  std::vector<bool> used2(n2, false);
  std::size_t m = 0;
  for (std::size_t i = 0; i < n1; ++i) {
    const std::size_t lo = i >= window ? i - window : 0;
    const std::size_t hi = std::min(n2, i + window + 1);
    for (std::size_t j = lo; j < hi; ++j) {
      if (used2[j] || s1[i] != s2[j]) continue;
      used1[i] = used2[j] = true;
      ++m;
      break;
    }
  }
  if (m == 0) return 0.0;

  // Count order mismatches between the matched characters of each string.
  std::size_t mismatches = 0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < n1; ++i) {
    if (!used1[i]) continue;
    while (!used2[j]) ++j;
    if (s1[i] != s2[j]) ++mismatches;
    ++j;
  }
  // t = mismatches / 2, so (m - t) / m = (2m - mismatches) / (2m).
  const double md = static_cast<double>(m);
  return (md / n1 + md / n2 + static_cast<double>(2 * m - mismatches) / (2.0 * md)) / 3.0;
}

std::size_t levenshtein(std::string_view s1, std::string_view s2) {
  std::vector<std::size_t> prev(s2.size() + 1);
  std::vector<std::size_t> cur(s2.size() + 1);
  for (std::size_t j = 0; j <= s2.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= s1.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= s2.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (s1[i - 1] == s2[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[s2.size()];
}

std::optional<double> plate_frame_score(std::span<const PlatePair> matched_plates) {
  if (matched_plates.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& [gt, rec] : matched_plates) sum += jaro_similarity(gt, rec);
  return sum / static_cast<double>(matched_plates.size());
}

double face_similarity(const Image& a, const Image& b, const FaceEmbedder& embedder) {
  return cosine_similarity(embedder.embed(a), embedder.embed(b));
}

double face_delta(const Image& ref, const Image& compr, const Image& database,
                  const FaceEmbedder& embedder) {
  const auto db = embedder.embed(database);
  return cosine_similarity(embedder.embed(ref), db) - cosine_similarity(embedder.embed(compr), db);
}

FacePairRecord make_face_record(std::string person_id, std::string database_image,
                                std::string reference_query, std::string compressed_query,
                                double r_ref, double r_compr) {
  return {std::move(person_id), std::move(database_image), std::move(reference_query),
          std::move(compressed_query), r_ref, r_compr, r_ref - r_compr};
}

double plate_jaro(std::string_view gt, std::string_view recognized,
                  const PlateAlphabet& alphabet) {
  bool changed_gt = false, changed_read = false;
  const auto a = alphabet.normalize(gt, &changed_gt);
  const auto b = alphabet.normalize(recognized, &changed_read);
  if (changed_gt || changed_read) {
    log::debug("plate strings normalized: '" + std::string(gt) + "' -> '" + a + "', '" +
               std::string(recognized) + "' -> '" + b + "'");
  }
  return jaro_similarity(a, b);
}

PlateTargetRecord make_plate_record(std::string frame_id, std::size_t plate_id, PlateString gt,
                                    PlateString recognized) {
  const double j = plate_jaro(gt.chars, recognized.chars);
  return {std::move(frame_id), plate_id, std::move(gt), std::move(recognized), j};
}

}  // namespace mvqa
