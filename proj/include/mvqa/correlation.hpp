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

namespace mvqa {

// Ranks 1..n; tied values share the average of their ranks.
std::vector<double> average_ranks(std::span<const double> x);

// Pearson linear correlation. nullopt when either series is constant (the
// reason goes to `diagnostic` if given). Throws InvalidArgument on unequal
// lengths, fewer than 3 samples or non-finite values.
std::optional<double> plcc(std::span<const double> x, std::span<const double> y,
                           std::string* diagnostic = nullptr);

// Spearman rank correlation: Pearson correlation of the average ranks.
std::optional<double> srcc(std::span<const double> x, std::span<const double> y,
                           std::string* diagnostic = nullptr);

}  // namespace mvqa
