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
#include <random>

#include <gtest/gtest.h>

#include "mvqa/correlation.hpp"
#include "oracles.hpp"

using namespace mvqa;

using V = std::vector<double>;

TEST(Srcc, Examples) {
  EXPECT_EQ(srcc(V{1, 2, 3}, V{10, 20, 30}).value(), 1.0);
  EXPECT_EQ(srcc(V{1, 2, 3}, V{3, 2, 1}).value(), -1.0);
  EXPECT_NEAR(srcc(V{1, 2, 3, 4}, V{1, 3, 2, 4}).value(), 0.8, 1e-15);
}

TEST(Plcc, Examples) {
  EXPECT_NEAR(plcc(V{1, 2, 3, 4}, V{3, 5, 7, 9}).value(), 1.0, 1e-15);
  EXPECT_NEAR(plcc(V{1, 2, 3, 4}, V{-1, -2, -3, -4}).value(), -1.0, 1e-15);
  // sxy = 4, sxx = 2, syy = 26 / 3.
  EXPECT_NEAR(plcc(V{0, 1, 2}, V{0, 1, 4}).value(), 4.0 / std::sqrt(2.0 * 26.0 / 3.0), 1e-15);
  EXPECT_NEAR(plcc(V{0, 1, 2}, V{0, 1, 4}).value(), 0.9608, 1e-4);
}

TEST(Correlation, DegenerateInputs) {
  std::string why;
  EXPECT_FALSE(plcc(V{1, 1, 1}, V{1, 2, 3}, &why).has_value());
  EXPECT_FALSE(why.empty());
  EXPECT_FALSE(srcc(V{1, 2, 3}, V{5, 5, 5}).has_value());
  EXPECT_THROW(plcc(V{1, 2}, V{1, 2}), InvalidArgument);
  EXPECT_THROW(srcc(V{1, 2, 3}, V{1, 2}), InvalidArgument);
  EXPECT_THROW(plcc(V{1, NAN, 3}, V{1, 2, 3}), InvalidArgument);
}

TEST(Ranks, AverageForTies) {
  EXPECT_EQ(average_ranks(V{10, 20, 20, 5}), (V{2, 3.5, 3.5, 1}));
}

TEST(Correlation, AgreesWithOracleOnTiedAndUntiedSeries) {
  std::mt19937_64 rng(51);
  std::uniform_int_distribution<int> len(3, 20);
  std::uniform_int_distribution<int> small(0, 4);
  std::normal_distribution<double> n(0.0, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    const int k = len(rng);
    const bool ties = trial % 2 == 0;
    V x(k), y(k);
    for (int i = 0; i < k; ++i) {
      x[i] = ties ? small(rng) : n(rng);
      y[i] = ties ? small(rng) : n(rng);
    }
    const auto s = srcc(x, y);
    const auto p = plcc(x, y);
    const bool constant = oracle::ranks(x) == V(k, (k + 1) / 2.0) ||
                          oracle::ranks(y) == V(k, (k + 1) / 2.0);
    ASSERT_EQ(s.has_value(), !constant);
    if (!s) continue;
    EXPECT_NEAR(*s, oracle::spearman(x, y), 1e-12);
    EXPECT_NEAR(*p, oracle::pearson(x, y), 1e-12);
    EXPECT_LE(std::abs(*s), 1.0);
    EXPECT_LE(std::abs(*p), 1.0);
    ++checked;
  }
  EXPECT_GT(checked, 2500);
}

TEST(Correlation, TransformInvariance) {
  std::mt19937_64 rng(52);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> pos(0.1, 10.0);
  for (int trial = 0; trial < 500; ++trial) {
    V x(12), y(12);
    for (auto& v : x) v = n(rng);
    for (auto& v : y) v = n(rng);
    const double s = srcc(x, y).value();
    const double p = plcc(x, y).value();
    V ex = x, cy = y, ax = x;
    for (auto& v : ex) v = std::exp(v);
    for (auto& v : cy) v = v * v * v;
    const double a = pos(rng), b = n(rng);
    for (auto& v : ax) v = a * v + b;
    EXPECT_NEAR(srcc(ex, cy).value(), s, 1e-12);
    EXPECT_NEAR(plcc(ax, y).value(), p, 1e-12);
  }
}
