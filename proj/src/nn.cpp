/*
 * Copyright 2026 The odflow Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "odflow/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "odflow/error.hpp"
#include "odflow/random.hpp"

namespace odflow::nn {

Dense::Dense(std::size_t in, std::size_t out, bool bias, Rng& rng)
    : weight_(out, in), bias_(Vector::Zero(static_cast<Eigen::Index>(out))), has_bias_(bias) {
  // He-uniform initialisation for rectified stacks.
  const double limit = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(in, 1)));
  for (Eigen::Index i = 0; i < weight_.size(); ++i) {
    weight_.data()[i] = (2.0 * uniform01(rng) - 1.0) * limit;
  }
  zero_grad();
}

Matrix Dense::forward(const Matrix& x) {
  input_ = x;
  return infer(x);
}

Matrix Dense::infer(const Matrix& x) const {
  Matrix y = x * weight_.transpose();
  if (has_bias_) y.rowwise() += bias_.transpose();
  return y;
}

Matrix Dense::backward(const Matrix& grad_out) {
  grad_weight_.noalias() += grad_out.transpose() * input_;
  if (has_bias_) grad_bias_ += grad_out.colwise().sum().transpose();
  return grad_out * weight_;
}

void Dense::zero_grad() {
  grad_weight_ = Matrix::Zero(weight_.rows(), weight_.cols());
  grad_bias_ = Vector::Zero(bias_.size());
}

void Dense::collect(std::vector<Param>& out, const std::string& prefix) {
  out.push_back({prefix + ".weight", weight_.data(), grad_weight_.data(),
                 static_cast<std::size_t>(weight_.size())});
  if (has_bias_) {
    out.push_back({prefix + ".bias", bias_.data(), grad_bias_.data(),
                   static_cast<std::size_t>(bias_.size())});
  }
}

nlohmann::json Dense::to_json() const {
  return {{"in", in()},
          {"out", out()},
          {"bias", has_bias_},
          {"weight", std::vector<double>(weight_.data(), weight_.data() + weight_.size())},
          {"bias_values", std::vector<double>(bias_.data(), bias_.data() + bias_.size())}};
}

Dense Dense::from_json(const nlohmann::json& j) {
  Dense d;
  const auto in = j.at("in").get<Eigen::Index>();
  const auto out = j.at("out").get<Eigen::Index>();
  const auto w = j.at("weight").get<std::vector<double>>();
  const auto b = j.at("bias_values").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(w.size()) != in * out ||
      static_cast<Eigen::Index>(b.size()) != out) {
    raise(ErrorCode::kFormat, "dense layer parameter size mismatch");
  }
  d.has_bias_ = j.at("bias").get<bool>();
  d.weight_ = Eigen::Map<const Matrix>(w.data(), out, in);
  d.bias_ = Eigen::Map<const Vector>(b.data(), out);
  d.zero_grad();
  return d;
}

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix relu_backward(const Matrix& grad, const Matrix& pre) {
  return (pre.array() > 0.0).select(grad, 0.0);
}

Mlp::Mlp(std::size_t in, const std::vector<std::size_t>& widths, bool relu_last, Rng& rng)
    : in_(in), relu_last_(relu_last) {
  std::size_t prev = in;
  for (std::size_t w : widths) {
    if (w == 0) raise(ErrorCode::kConfig, "layer widths must be >= 1");
    layers_.emplace_back(prev, w, true, rng);
    prev = w;
  }
}

Matrix Mlp::forward(const Matrix& x) {
  pre_.clear();
  Matrix h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Matrix z = layers_[i].forward(h);
    const bool act = relu_last_ || i + 1 < layers_.size();
    h = act ? relu(z) : z;
    pre_.push_back(std::move(z));
  }
  return h;
}

Matrix Mlp::infer(const Matrix& x) const {
  Matrix h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Matrix z = layers_[i].infer(h);
    const bool act = relu_last_ || i + 1 < layers_.size();
    h = act ? relu(z) : std::move(z);
  }
  return h;
}

Matrix Mlp::backward(const Matrix& grad_out) {
  Matrix g = grad_out;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const bool act = relu_last_ || k + 1 < layers_.size();
    if (act) g = relu_backward(g, pre_[k]);
    g = layers_[k].backward(g);
  }
  return g;
}

void Mlp::zero_grad() {
  for (auto& l : layers_) l.zero_grad();
}

void Mlp::collect(std::vector<Param>& out, const std::string& prefix) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect(out, fmt::format("{}.{}", prefix, i));
  }
}

nlohmann::json Mlp::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : layers_) layers.push_back(l.to_json());
  return {{"in", in_}, {"relu_last", relu_last_}, {"layers", layers}};
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  Mlp m;
  m.in_ = j.at("in").get<std::size_t>();
  m.relu_last_ = j.at("relu_last").get<bool>();
  for (const auto& l : j.at("layers")) m.layers_.push_back(Dense::from_json(l));
  return m;
}

void Adam::step(std::span<const Param> params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.size, 0.0);
      v_.emplace_back(p.size, 0.0);
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Param& p = params[k];
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.size; ++i) {
      const double g = p.grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      p.value[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

double mse_loss(std::span<const double> pred, std::span<const double> target,
                std::vector<double>* grad) {
  if (pred.size() != target.size()) raise(ErrorCode::kShape, "prediction/target length mismatch");
  if (pred.empty()) return 0.0;
  const double n = static_cast<double>(pred.size());
  double sum = 0.0;
  if (grad) grad->assign(pred.size(), 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    sum += d * d;
    if (grad) (*grad)[i] = 2.0 * d / n;
  }
  return sum / n;
}

std::vector<double> group_softmax(std::span<const double> scores, const Groups& groups) {
  std::vector<double> p(scores.size(), 0.0);
  for (const auto& g : groups) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i : g) mx = std::max(mx, scores[i]);
    double z = 0.0;
    for (std::size_t i : g) {
      p[i] = std::exp(scores[i] - mx);
      z += p[i];
    }
    for (std::size_t i : g) p[i] /= z;
  }
  return p;
}

double softmax_ce_loss(std::span<const double> scores, std::span<const double> target,
                       const Groups& groups, std::vector<double>* grad) {
  if (scores.size() != target.size()) raise(ErrorCode::kShape, "score/target length mismatch");
  if (groups.empty()) return 0.0;
  const double n = static_cast<double>(groups.size());
  if (grad) grad->assign(scores.size(), 0.0);
  double total = 0.0;
  for (const auto& g : groups) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i : g) mx = std::max(mx, scores[i]);
    double z = 0.0;
    for (std::size_t i : g) z += std::exp(scores[i] - mx);
    const double log_z = mx + std::log(z);
    double mass = 0.0;
    for (std::size_t i : g) {
      if (target[i] != 0.0) total -= target[i] * (scores[i] - log_z);
      mass += target[i];
    }
    if (grad) {
      for (std::size_t i : g) {
        (*grad)[i] = (std::exp(scores[i] - log_z) * mass - target[i]) / n;
      }
    }
  }
  return total / n;
}

std::vector<std::size_t> validation_split(std::size_t count, double fraction,
                                          std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0) {
    raise(ErrorCode::kConfig, "validation fraction must lie in [0, 1)");
  }
  const auto held = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(count)));
  if (held == 0 || held >= count) return {};
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = i;
  Rng rng(mix_seed(seed, 0x7661'6c69'6461'7465ULL));
  shuffle(idx, rng);
  idx.resize(held);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream));
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = uniform_index(rng, i);
    std::swap(v[i - 1], v[j]);
  }
}

GradCheckResult check_gradients(std::span<const Param> params,
                                const std::function<double()>& loss, double step,
                                double floor) {
  GradCheckResult result;
  for (const auto& p : params) {
    for (std::size_t i = 0; i < p.size; ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + step;
      const double up = loss();
      p.value[i] = saved - step;
      const double down = loss();
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = p.grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
      const double rel = std::abs(analytic - numeric) / denom;
      ++result.checked;
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_param = fmt::format("{}[{}]", p.name, i);
      }
    }
  }
  return result;
}

}  // namespace odflow::nn
