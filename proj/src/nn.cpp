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

#include "mvqa/nn.hpp"

#include <cmath>

#include "mvqa/errors.hpp"

namespace mvqa::nn {

Tensor to_tensor(const Image& img) {
  Tensor t;
  t.channels = img.channels;
  t.height = img.height;
  t.width = img.width;
  const int hw = img.width * img.height;
  t.data.resize(img.channels, hw);
  for (int i = 0; i < hw; ++i) {
    for (int c = 0; c < img.channels; ++c) {
      t.data(c, i) = img.data[static_cast<std::size_t>(i) * img.channels + c] / 255.0 - 0.5;
    }
  }
  return t;
}

namespace {

void he_init(Matrix& w, int fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
}

}  // namespace

Conv2d::Conv2d(int in_channels, int out_channels, int stride, std::mt19937_64& rng)
    : in_(in_channels), out_(out_channels), stride_(stride) {
  weight_.resize(out_, in_ * kKernel * kKernel);
  he_init(weight_, in_ * kKernel * kKernel, rng);
  bias_ = Vector::Zero(out_);
  grad_weight_ = Matrix::Zero(weight_.rows(), weight_.cols());
  grad_bias_ = Vector::Zero(out_);
}

Tensor Conv2d::forward(const Tensor& x, Trace* trace) const {
  if (x.channels != in_) throw InvalidArgument("conv input channel mismatch");
  const int oh = (x.height + 2 * kPad - kKernel) / stride_ + 1;
  const int ow = (x.width + 2 * kPad - kKernel) / stride_ + 1;
  Matrix cols = Matrix::Zero(in_ * kKernel * kKernel, static_cast<Eigen::Index>(oh) * ow);
  for (int c = 0; c < in_; ++c) {
    for (int ky = 0; ky < kKernel; ++ky) {
      for (int kx = 0; kx < kKernel; ++kx) {
        const int row = (c * kKernel + ky) * kKernel + kx;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride_ - kPad + ky;
          if (iy < 0 || iy >= x.height) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride_ - kPad + kx;
            if (ix < 0 || ix >= x.width) continue;
            cols(row, oy * ow + ox) = x.data(c, iy * x.width + ix);
          }
        }
      }
    }
  }
  Tensor y;
  y.channels = out_;
  y.height = oh;
  y.width = ow;
  y.data = weight_ * cols;
  y.data.colwise() += bias_;
  if (trace != nullptr) {
    trace->in_h = x.height;
    trace->in_w = x.width;
    trace->out_h = oh;
    trace->out_w = ow;
    trace->cols = std::move(cols);
  }
  return y;
}

Tensor Conv2d::backward(const Trace& trace, const Tensor& d_out) {
  grad_weight_.noalias() += d_out.data * trace.cols.transpose();
  grad_bias_ += d_out.data.rowwise().sum();
  const Matrix d_cols = weight_.transpose() * d_out.data;
  Tensor dx;
  dx.channels = in_;
  dx.height = trace.in_h;
  dx.width = trace.in_w;
  dx.data = Matrix::Zero(in_, static_cast<Eigen::Index>(trace.in_h) * trace.in_w);
  const int oh = trace.out_h;
  const int ow = trace.out_w;
  for (int c = 0; c < in_; ++c) {
    for (int ky = 0; ky < kKernel; ++ky) {
      for (int kx = 0; kx < kKernel; ++kx) {
        const int row = (c * kKernel + ky) * kKernel + kx;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride_ - kPad + ky;
          if (iy < 0 || iy >= trace.in_h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride_ - kPad + kx;
            if (ix < 0 || ix >= trace.in_w) continue;
            dx.data(c, iy * trace.in_w + ix) += d_cols(row, oy * ow + ox);
          }
        }
      }
    }
  }
  return dx;
}

void Conv2d::collect(std::vector<ParamBlock>& out) {
  out.push_back({weight_.data(), grad_weight_.data(), static_cast<std::size_t>(weight_.size())});
  out.push_back({bias_.data(), grad_bias_.data(), static_cast<std::size_t>(bias_.size())});
}

void Conv2d::zero_grad() {
  grad_weight_.setZero();
  grad_bias_.setZero();
}

Linear::Linear(int in_features, int out_features, bool zero_init, std::mt19937_64& rng) {
  weight_ = Matrix::Zero(out_features, in_features);
  if (!zero_init) he_init(weight_, in_features, rng);
  bias_ = Vector::Zero(out_features);
  grad_weight_ = Matrix::Zero(out_features, in_features);
  grad_bias_ = Vector::Zero(out_features);
}

Vector Linear::forward(const Vector& x) const {
  Vector y = weight_ * x;
  y += bias_;
  return y;
}

Vector Linear::backward(const Vector& x, const Vector& d_out) {
  grad_weight_.noalias() += d_out * x.transpose();
  grad_bias_ += d_out;
  return weight_.transpose() * d_out;
}

void Linear::collect(std::vector<ParamBlock>& out) {
  out.push_back({weight_.data(), grad_weight_.data(), static_cast<std::size_t>(weight_.size())});
  out.push_back({bias_.data(), grad_bias_.data(), static_cast<std::size_t>(bias_.size())});
}

void Linear::zero_grad() {
  grad_weight_.setZero();
  grad_bias_.setZero();
}

Vector relu(const Vector& v) { return v.cwiseMax(0.0); }
Matrix relu(const Matrix& m) { return m.cwiseMax(0.0); }

Matrix relu_backward(const Matrix& pre, const Matrix& d_out) {
  return (pre.array() > 0.0).select(d_out, 0.0);
}

Backbone::Backbone(const BackboneConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
  if (cfg.stage_channels.empty()) throw InvalidArgument("backbone needs at least one stage");
  int in = cfg.in_channels;
  for (int ch : cfg.stage_channels) {
    Stage s;
    s.down = Conv2d(in, ch, 2, rng);
    if (cfg.residual) {
      s.res1 = Conv2d(ch, ch, 1, rng);
      s.res2 = Conv2d(ch, ch, 1, rng);
    }
    stages_.push_back(std::move(s));
    in = ch;
  }
}

Vector Backbone::forward(const Tensor& x, Trace* trace) const {
  if (trace != nullptr) trace->stages.assign(stages_.size(), {});
  Tensor cur = x;
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    StageTrace* st = trace != nullptr ? &trace->stages[i] : nullptr;
    Tensor pre = stages_[i].down.forward(cur, st != nullptr ? &st->down : nullptr);
    cur = pre;
    cur.data = relu(pre.data);
    if (st != nullptr) st->down_pre = std::move(pre.data);
    if (cfg_.residual) {
      Tensor r1 = stages_[i].res1.forward(cur, st != nullptr ? &st->res1 : nullptr);
      Tensor a1 = r1;
      a1.data = relu(r1.data);
      if (st != nullptr) st->res1_pre = std::move(r1.data);
      Tensor r2 = stages_[i].res2.forward(a1, st != nullptr ? &st->res2 : nullptr);
      Matrix sum = cur.data + r2.data;
      cur.data = relu(sum);
      if (st != nullptr) st->res_sum = std::move(sum);
    }
  }
  if (trace != nullptr) {
    trace->last_h = cur.height;
    trace->last_w = cur.width;
    trace->last_hw = cur.height * cur.width;
  }
  return cur.data.rowwise().mean();
}

void Backbone::backward(const Trace& trace, const Vector& d_feature) {
  // Global average pooling spreads the gradient evenly.
  Tensor d;
  d.channels = static_cast<int>(d_feature.size());
  d.height = trace.last_h;
  d.width = trace.last_w;
  d.data = d_feature.replicate(1, trace.last_hw) / static_cast<double>(trace.last_hw);
  for (std::size_t k = stages_.size(); k-- > 0;) {
    const StageTrace& st = trace.stages[k];
    Stage& s = stages_[k];
    if (cfg_.residual) {
      Tensor d_sum = d;
      d_sum.data = relu_backward(st.res_sum, d.data);
      Tensor d_a1 = s.res2.backward(st.res2, d_sum);
      d_a1.data = relu_backward(st.res1_pre, d_a1.data);
      Tensor d_skip = s.res1.backward(st.res1, d_a1);
      d.data = d_sum.data + d_skip.data;
    }
    d.data = relu_backward(st.down_pre, d.data);
    d = s.down.backward(st.down, d);
  }
}

void Backbone::collect(std::vector<ParamBlock>& out) {
  for (auto& s : stages_) {
    s.down.collect(out);
    if (cfg_.residual) {
      s.res1.collect(out);
      s.res2.collect(out);
    }
  }
}

void Backbone::zero_grad() {
  for (auto& s : stages_) {
    s.down.zero_grad();
    if (cfg_.residual) {
      s.res1.zero_grad();
      s.res2.zero_grad();
    }
  }
}

std::size_t parameter_count(std::span<const ParamBlock> blocks) {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.size;
  return n;
}

std::vector<double> flatten_values(std::span<const ParamBlock> blocks) {
  std::vector<double> out;
  out.reserve(parameter_count(blocks));
  for (const auto& b : blocks) out.insert(out.end(), b.value, b.value + b.size);
  return out;
}

void assign_values(std::span<const ParamBlock> blocks, std::span<const double> values) {
  if (values.size() != parameter_count(blocks)) {
    throw InvalidArgument("parameter count mismatch: got " + std::to_string(values.size()) +
                          ", model has " + std::to_string(parameter_count(blocks)));
  }
  std::size_t off = 0;
  for (const auto& b : blocks) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(off), b.size, b.value);
    off += b.size;
  }
}

std::vector<double> flatten_grads(std::span<const ParamBlock> blocks) {
  std::vector<double> out;
  out.reserve(parameter_count(blocks));
  for (const auto& b : blocks) out.insert(out.end(), b.grad, b.grad + b.size);
  return out;
}

void Adam::step(std::span<const ParamBlock> blocks, double lr_scale) {
  const std::size_t n = parameter_count(blocks);
  if (m_.size() != n) {
    m_.assign(n, 0.0);
    v_.assign(n, 0.0);
    step_ = 0;
  }
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  const double lr = cfg_.learning_rate * lr_scale;
  std::size_t i = 0;
  for (const auto& b : blocks) {
    for (std::size_t k = 0; k < b.size; ++k, ++i) {
      const double g = b.grad[k];
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
      b.value[k] -= lr * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + cfg_.epsilon);
    }
  }
}

}  // namespace mvqa::nn
