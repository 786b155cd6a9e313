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
// Brute-force reference implementations, written independently of the
// library code. Slow on purpose.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mvqa/core_types.hpp"

namespace oracle {

// Integer box [x0, x1) x [y0, y1); IoU by counting unit cells.
struct IntBox {
  int x0, y0, x1, y1;
  mvqa::BoundingBox box() const { return {double(x0), double(y0), double(x1), double(y1)}; }
};

inline double iou_cells(const IntBox& a, const IntBox& b) {
  const int lo_x = std::min(a.x0, b.x0), hi_x = std::max(a.x1, b.x1);
  const int lo_y = std::min(a.y0, b.y0), hi_y = std::max(a.y1, b.y1);
  long inter = 0, uni = 0;
  for (int y = lo_y; y < hi_y; ++y) {
    for (int x = lo_x; x < hi_x; ++x) {
      const bool in_a = x >= a.x0 && x < a.x1 && y >= a.y0 && y < a.y1;
      const bool in_b = x >= b.x0 && x < b.x1 && y >= b.y0 && y < b.y1;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  }
  return uni == 0 ? 0.0 : double(inter) / double(uni);
}

inline IntBox random_box(std::mt19937_64& rng, int extent = 24) {
  std::uniform_int_distribution<int> pos(0, extent - 2);
  IntBox b{};
  b.x0 = pos(rng);
  b.y0 = pos(rng);
  b.x1 = std::uniform_int_distribution<int>(b.x0 + 1, extent)(rng);
  b.y1 = std::uniform_int_distribution<int>(b.y0 + 1, extent)(rng);
  return b;
}

// Jaro: for each character of s1 in order, take the first unused equal
// character of s2 within the window. Transpositions counted on the two
// matched subsequences.
inline double jaro(const std::string& s1, const std::string& s2) {
  if (s1.empty() || s2.empty()) return 0.0;
  const int window = std::max<int>(0, int(std::max(s1.size(), s2.size())) / 2 - 1);
  std::vector<bool> used(s2.size(), false);
  std::string a, b_order;
  std::vector<int> matched_pos;
  for (int i = 0; i < int(s1.size()); ++i) {
    for (int j = std::max(0, i - window); j <= std::min<int>(int(s2.size()) - 1, i + window); ++j) {
      if (!used[j] && s2[j] == s1[i]) {
        used[j] = true;
        a.push_back(s1[i]);
        break;
      }
    }
  }
  for (std::size_t j = 0; j < s2.size(); ++j) {
    if (used[j]) b_order.push_back(s2[j]);
  }
  const double m = double(a.size());
  if (m == 0) return 0.0;
  int half = 0;
  for (std::size_t k = 0; k < a.size(); ++k) half += a[k] != b_order[k];
  const double t = half / 2.0;
  return (m / double(s1.size()) + m / double(s2.size()) + (m - t) / m) / 3.0;
}

// Edit distance by exhaustive recursion with memoisation over (i, j).
inline std::size_t levenshtein(const std::string& s, const std::string& t) {
  std::vector<std::vector<long>> memo(s.size() + 1, std::vector<long>(t.size() + 1, -1));
  std::function<long(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> long {
    if (i == s.size()) return long(t.size() - j);
    if (j == t.size()) return long(s.size() - i);
    long& r = memo[i][j];
    if (r >= 0) return r;
    r = std::min({go(i + 1, j) + 1, go(i, j + 1) + 1, go(i + 1, j + 1) + (s[i] != t[j])});
    return r;
  };
  return std::size_t(go(0, 0));
}

// Rank = 1 + (#smaller) + (#equal - 1) / 2.
inline std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    int less = 0, equal = 0;
    for (double v : x) {
      less += v < x[i];
      equal += v == x[i];
    }
    r[i] = 1.0 + less + (equal - 1) / 2.0;
  }
  return r;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return double(sxy / std::sqrt(sxx * syy));
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(ranks(x), ranks(y));
}

// Maximum matched-IoU sum over all one-to-one partial assignments whose pairs
// clear the threshold. IoUs given as gt x det matrix.
inline double best_assignment_sum(const std::vector<std::vector<double>>& m, double threshold) {
  const std::size_t g = m.size();
  const std::size_t d = g ? m[0].size() : 0;
  double best = 0.0;
  std::vector<int> assign(g, -1);
  std::vector<bool> used(d, false);
  std::function<void(std::size_t)> go = [&](std::size_t i) {
    if (i == g) {
      double s = 0.0;
      for (std::size_t k = 0; k < g; ++k) {
        if (assign[k] >= 0) s += m[k][std::size_t(assign[k])];
      }
      best = std::max(best, s);
      return;
    }
    assign[i] = -1;
    go(i + 1);
    for (std::size_t j = 0; j < d; ++j) {
      if (!used[j] && m[i][j] >= threshold) {
        used[j] = true;
        assign[i] = int(j);
        go(i + 1);
        used[j] = false;
        assign[i] = -1;
      }
    }
  };
  go(0);
  return best;
}

inline std::string random_string(std::mt19937_64& rng, const std::string& alphabet,
                                 std::size_t max_len) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string s(len(rng), ' ');
  for (auto& c : s) c = alphabet[pick(rng)];
  return s;
}

}  // namespace oracle
