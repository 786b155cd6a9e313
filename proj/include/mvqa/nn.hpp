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

// Minimal CNN building blocks with hand-written backward passes. Feature maps
// are stored channel-major as (channels x height*width) matrices.

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "mvqa/image.hpp"

namespace mvqa::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  Matrix data;  // channels x (height * width)
};

// uint8 image -> (x / 255 - 0.5), channel-major.
Tensor to_tensor(const Image& img);

// A trainable parameter block and its gradient accumulator.
struct ParamBlock {
  double* value;
  double* grad;
  std::size_t size;
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in_channels, int out_channels, int stride, std::mt19937_64& rng);

  struct Trace {
    int in_h = 0;
    int in_w = 0;
    int out_h = 0;
    int out_w = 0;
    Matrix cols;
  };

  Tensor forward(const Tensor& x, Trace* trace) const;
  // Accumulates parameter gradients; returns d(loss)/d(input).
  Tensor backward(const Trace& trace, const Tensor& d_out);

  void collect(std::vector<ParamBlock>& out);
  void zero_grad();
  int in_channels() const noexcept { return in_; }
  int out_channels() const noexcept { return out_; }

 private:
  static constexpr int kKernel = 3;
  static constexpr int kPad = 1;
  int in_ = 0;
  int out_ = 0;
  int stride_ = 1;
  Matrix weight_;  // out x (in * 9)
  Vector bias_;
  Matrix grad_weight_;
  Vector grad_bias_;
};

class Linear {
 public:
  Linear() = default;
  // zero_init: weights and bias start at exactly 0.
  Linear(int in_features, int out_features, bool zero_init, std::mt19937_64& rng);

  Vector forward(const Vector& x) const;
  // Accumulates gradients given the forward input; returns d(loss)/d(x).
  Vector backward(const Vector& x, const Vector& d_out);

  void collect(std::vector<ParamBlock>& out);
  void zero_grad();
  int in_features() const noexcept { return static_cast<int>(weight_.cols()); }
  int out_features() const noexcept { return static_cast<int>(weight_.rows()); }

 private:
  Matrix weight_;
  Vector bias_;
  Matrix grad_weight_;
  Vector grad_bias_;
};

struct BackboneConfig {
  int in_channels = 3;
  std::vector<int> stage_channels{8, 16, 32};
  // Adds a two-conv identity-skip block after each downsampling conv.
  bool residual = false;

  friend bool operator==(const BackboneConfig&, const BackboneConfig&) = default;
};

// Stack of stride-2 conv + ReLU stages (optionally followed by a residual
// block each), then global average pooling to a feature vector.
class Backbone {
 public:
  Backbone() = default;
  Backbone(const BackboneConfig& cfg, std::mt19937_64& rng);

  struct StageTrace {
    Conv2d::Trace down;
    Matrix down_pre;  // pre-activation of the downsampling conv
    Conv2d::Trace res1;
    Matrix res1_pre;
    Conv2d::Trace res2;
    Matrix res_sum;  // skip + residual before the final ReLU
  };
  struct Trace {
    std::vector<StageTrace> stages;
    int last_hw = 0;
    int last_h = 0;
    int last_w = 0;
  };

  Vector forward(const Tensor& x, Trace* trace) const;
  void backward(const Trace& trace, const Vector& d_feature);

  void collect(std::vector<ParamBlock>& out);
  void zero_grad();
  int feature_size() const noexcept { return cfg_.stage_channels.back(); }
  const BackboneConfig& config() const noexcept { return cfg_; }

 private:
  struct Stage {
    Conv2d down;
    Conv2d res1;
    Conv2d res2;
  };
  BackboneConfig cfg_;
  std::vector<Stage> stages_;
};

Vector relu(const Vector& v);
Matrix relu(const Matrix& m);
// d_out masked where pre <= 0.
Matrix relu_backward(const Matrix& pre, const Matrix& d_out);

std::size_t parameter_count(std::span<const ParamBlock> blocks);
std::vector<double> flatten_values(std::span<const ParamBlock> blocks);
void assign_values(std::span<const ParamBlock> blocks, std::span<const double> values);
std::vector<double> flatten_grads(std::span<const ParamBlock> blocks);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
  void step(std::span<const ParamBlock> blocks, double lr_scale = 1.0);

 private:
  AdamConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  long step_ = 0;
};

}  // namespace mvqa::nn
