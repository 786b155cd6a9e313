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

#include <algorithm>
#include <cmath>
#include <random>
#include <span>

#include "mvqa/quality_models.hpp"
#include "mvqa/training.hpp"

// Small configurations so tests stay fast.
inline mvqa::ModelConfig small_config(mvqa::ModelKind kind, std::uint64_t seed = 1) {
  auto cfg = mvqa::default_model_config(kind);
  if (kind == mvqa::ModelKind::kPlate) {
    cfg.input_width = 24;
    cfg.input_height = 8;
  } else {
    cfg.input_width = cfg.input_height = 16;
  }
  cfg.backbone.stage_channels = {4, 8};
  cfg.hidden = 6;
  cfg.subset_size = 4;
  cfg.seed = seed;
  return cfg;
}

// Overwrites every parameter (zero-initialised heads included) with noise so
// that outputs and gradients are non-trivial.
inline void randomize(mvqa::QualityModel& m, std::uint64_t seed, double scale = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  for (const auto& b : m.parameters()) {
    for (std::size_t i = 0; i < b.size; ++i) b.value[i] = n(rng);
  }
}

inline mvqa::Image noise_image(int w, int h, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  mvqa::Image img(w, h, c);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng() & 0xff);
  return img;
}

// Central finite differences over the head parameters (the blocks after the
// backbone); returns the norm-wise relative error against the analytic gradient.
inline double head_gradient_error(mvqa::QualityModel& model, std::span<const mvqa::Sample> batch,
                                  std::size_t backbone_blocks) {
  mvqa::loss_and_gradients(model, batch);
  const auto blocks = model.parameters();
  double num = 0.0, den = 0.0;
  const double h = 1e-6;
  for (std::size_t b = backbone_blocks; b < blocks.size(); ++b) {
    for (std::size_t i = 0; i < blocks[b].size; ++i) {
      double& w = blocks[b].value[i];
      const double keep = w;
      w = keep + h;
      const double up = mvqa::evaluate_loss(model, batch);
      w = keep - h;
      const double down = mvqa::evaluate_loss(model, batch);
      w = keep;
      const double fd = (up - down) / (2 * h);
      const double an = blocks[b].grad[i];
      num += (fd - an) * (fd - an);
      den += std::max(fd * fd, an * an);
    }
  }
  return std::sqrt(num / den);
}

inline std::size_t backbone_block_count(const mvqa::ModelConfig& cfg) {
  std::mt19937_64 rng(0);
  mvqa::nn::BackboneConfig bc = cfg.backbone;
  mvqa::nn::Backbone bb(bc, rng);
  std::vector<mvqa::nn::ParamBlock> blocks;
  bb.collect(blocks);
  return blocks.size();
}
