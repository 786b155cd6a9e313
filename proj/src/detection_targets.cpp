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

#include "mvqa/detection_targets.hpp"

#include <algorithm>
#include <limits>
#include <tuple>

namespace mvqa {

double MatchResult::iou_for_gt(std::size_t gt_index) const noexcept {
  for (const auto& p : pairs) {
    if (p.gt_index == gt_index) return p.iou;
  }
  return 0.0;
}

namespace {

bool pair_order(const MatchPair& a, const MatchPair& b) {
  if (a.iou != b.iou) return a.iou > b.iou;
  return std::tie(a.gt_index, a.det_index) < std::tie(b.gt_index, b.det_index);
}

// Maximum-weight assignment on a rows x cols matrix with rows <= cols.
// Returns col index per row. Classic potentials formulation, O(rows^2 cols).
std::vector<std::size_t> max_weight_assignment(const std::vector<std::vector<double>>& w,
                                               std::size_t rows, std::size_t cols) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(rows + 1, 0.0);
  std::vector<double> v(cols + 1, 0.0);
  std::vector<std::size_t> p(cols + 1, 0);
  std::vector<std::size_t> way(cols + 1, 0);
  for (std::size_t i = 1; i <= rows; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(cols + 1, kInf);
    std::vector<bool> used(cols + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        const double cur = -w[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(rows, cols);
  for (std::size_t j = 1; j <= cols; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

}  // namespace

MatchResult match_detections(std::span<const Detection> gt, std::span<const Detection> det,
                             const MatchOptions& opts) {
  if (!(opts.threshold > 0.0 && opts.threshold < 1.0)) {
    throw InvalidArgument("match threshold must lie in (0,1)");
  }
  // weight[g][d] = IoU for admissible pairs, 0 otherwise.
  std::vector<std::vector<double>> weight(gt.size(), std::vector<double>(det.size(), 0.0));
  std::vector<MatchPair> candidates;
  for (std::size_t g = 0; g < gt.size(); ++g) {
    for (std::size_t d = 0; d < det.size(); ++d) {
      if (opts.class_aware && gt[g].class_id != det[d].class_id) continue;
      const double v = iou(gt[g].box, det[d].box);
      if (v >= opts.threshold) {
        candidates.push_back({g, d, v});
        weight[g][d] = v;
      }
    }
  }

  MatchResult out;
  std::vector<bool> gt_used(gt.size(), false);
  std::vector<bool> det_used(det.size(), false);
  if (opts.strategy == MatchStrategy::kGreedy) {
    std::sort(candidates.begin(), candidates.end(), pair_order);
    for (const auto& c : candidates) {
      if (gt_used[c.gt_index] || det_used[c.det_index]) continue;
      gt_used[c.gt_index] = true;
      det_used[c.det_index] = true;
      out.pairs.push_back(c);
    }
  } else if (!candidates.empty()) {
    const bool transpose = gt.size() > det.size();
    const std::size_t rows = transpose ? det.size() : gt.size();
    const std::size_t cols = transpose ? gt.size() : det.size();
    std::vector<std::vector<double>> w(rows, std::vector<double>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) w[r][c] = transpose ? weight[c][r] : weight[r][c];
    }
    const auto assign = max_weight_assignment(w, rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t c = assign[r];
      if (c >= cols) continue;
      const std::size_t g = transpose ? c : r;
      const std::size_t d = transpose ? r : c;
      if (weight[g][d] <= 0.0) continue;
      gt_used[g] = true;
      det_used[d] = true;
      out.pairs.push_back({g, d, weight[g][d]});
    }
    std::sort(out.pairs.begin(), out.pairs.end(), pair_order);
  }
  for (std::size_t g = 0; g < gt.size(); ++g) {
    if (!gt_used[g]) out.unmatched_gt.push_back(g);
  }
  for (std::size_t d = 0; d < det.size(); ++d) {
    if (!det_used[d]) out.unmatched_det.push_back(d);
  }
  return out;
}

std::optional<double> mean_iou(std::span<const Detection> gt, std::span<const Detection> det,
                               const MatchOptions& opts) {
  if (gt.empty()) return std::nullopt;
  const auto m = match_detections(gt, det, opts);
  double sum = 0.0;
  for (std::size_t g = 0; g < gt.size(); ++g) sum += m.iou_for_gt(g);
  return sum / static_cast<double>(gt.size());
}

double object_iou(const Detection& gt_object, std::span<const Detection> det,
                  const MatchOptions& opts) {
  const auto m = match_detections(std::span(&gt_object, 1), det, opts);
  return m.iou_for_gt(0);
}

double delta_object_iou(double ref_iou, double compressed_iou) {
  return ref_iou - compressed_iou;
}

ObjectTargetRecord make_object_target(std::string frame_id, std::size_t object_id,
                                      double ref_iou, double compressed_iou, std::string codec,
                                      double quality_factor) {
  return {std::move(frame_id), object_id, ref_iou, compressed_iou,
          delta_object_iou(ref_iou, compressed_iou), std::move(codec), quality_factor};
}

}  // namespace mvqa
