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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvqa/core_types.hpp"

namespace mvqa {

struct MatchPair {
  std::size_t gt_index;
  std::size_t det_index;
  double iou;
  friend bool operator==(const MatchPair&, const MatchPair&) = default;
};

struct MatchResult {
  // Sorted by descending IoU, ties by gt index then det index.
  std::vector<MatchPair> pairs;
  std::vector<std::size_t> unmatched_gt;
  std::vector<std::size_t> unmatched_det;

  // IoU of the detection matched to `gt_index`, or 0 if it was missed.
  double iou_for_gt(std::size_t gt_index) const noexcept;
};

enum class MatchStrategy {
  // Maximum total IoU over all one-to-one assignments (Kuhn-Munkres).
  kOptimal,
  // Repeatedly take the highest remaining IoU pair. Equals kOptimal whenever no
  // detection clears the threshold against two GT objects.
  kGreedy,
};

struct MatchOptions {
  double threshold = 0.5;
  MatchStrategy strategy = MatchStrategy::kOptimal;
  // Only detections with the same class_id may match a GT object.
  bool class_aware = true;
};

// One-to-one GT/detection matching. Pairs below the threshold (or across
// classes, when class-aware) never match. Deterministic: greedy ties are broken
// by lower gt index then lower det index.
MatchResult match_detections(std::span<const Detection> gt, std::span<const Detection> det,
                             const MatchOptions& opts = {});

// Mean over GT objects of matched IoU, with 0 for each miss. nullopt for an
// empty GT list; such frames are excluded from aggregation.
std::optional<double> mean_iou(std::span<const Detection> gt, std::span<const Detection> det,
                               const MatchOptions& opts = {});

// IoU of the detection matched to this single GT object, or 0.
double object_iou(const Detection& gt_object, std::span<const Detection> det,
                  const MatchOptions& opts = {});

// ref_iou - compressed_iou. Negative when compression happened to help.
double delta_object_iou(double ref_iou, double compressed_iou);

struct ObjectTargetRecord {
  std::string frame_id;
  std::size_t object_id;
  double ref_iou;
  double compressed_iou;
  double delta;
  std::string codec;
  double quality_factor;
};

ObjectTargetRecord make_object_target(std::string frame_id, std::size_t object_id,
                                      double ref_iou, double compressed_iou, std::string codec,
                                      double quality_factor);

}  // namespace mvqa
