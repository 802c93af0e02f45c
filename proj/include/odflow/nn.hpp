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

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace odflow::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

/// View of one trainable tensor and its gradient accumulator.
struct Param {
  std::string name;
  double* value = nullptr;
  double* grad = nullptr;
  std::size_t size = 0;
};

/// Fully connected layer acting on row-major batches: y = x W^T + b.
class Dense {
 public:
  Dense() = default;
  Dense(std::size_t in, std::size_t out, bool bias, Rng& rng);

  Matrix forward(const Matrix& x);
  Matrix infer(const Matrix& x) const;
  /// Accumulates parameter gradients and returns dL/dx.
  Matrix backward(const Matrix& grad_out);

  void zero_grad();
  void collect(std::vector<Param>& out, const std::string& prefix);

  std::size_t in() const { return static_cast<std::size_t>(weight_.cols()); }
  std::size_t out() const { return static_cast<std::size_t>(weight_.rows()); }

  Matrix& weight() { return weight_; }
  Vector& bias() { return bias_; }
  const Matrix& weight() const { return weight_; }

  nlohmann::json to_json() const;
  static Dense from_json(const nlohmann::json& j);

 private:
  Matrix weight_;
  Vector bias_;
  bool has_bias_ = true;
  Matrix grad_weight_;
  Vector grad_bias_;
  Matrix input_;
};

/// Stack of dense layers with rectifiers between them. `relu_last` also
/// rectifies the final layer (encoders); without it the output is linear.
/// An empty width list is the identity map.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::size_t in, const std::vector<std::size_t>& widths, bool relu_last, Rng& rng);

  Matrix forward(const Matrix& x);
  Matrix infer(const Matrix& x) const;
  Matrix backward(const Matrix& grad_out);

  void zero_grad();
  void collect(std::vector<Param>& out, const std::string& prefix);

  std::size_t in() const { return in_; }
  std::size_t out() const { return layers_.empty() ? in_ : layers_.back().out(); }
  std::size_t depth() const { return layers_.size(); }

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);

 private:
  std::size_t in_ = 0;
  bool relu_last_ = false;
  std::vector<Dense> layers_;
  std::vector<Matrix> pre_;  // cached pre-activations
};

Matrix relu(const Matrix& x);
/// grad * 1[pre > 0]
Matrix relu_backward(const Matrix& grad, const Matrix& pre);

class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

  void step(std::span<const Param> params);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Mean squared error; fills `grad` with dL/dpred when non-null.
double mse_loss(std::span<const double> pred, std::span<const double> target,
                std::vector<double>* grad);

/// Groups of score indices that share a softmax (one origin's choice set).
using Groups = std::vector<std::vector<std::size_t>>;

/// Cross-entropy of per-group softmax(scores) against target shares,
/// averaged over groups. Fills `grad` with dL/dscores when non-null.
double softmax_ce_loss(std::span<const double> scores, std::span<const double> target,
                       const Groups& groups, std::vector<double>* grad);

/// Per-group softmax of scores; indices outside every group are left at 0.
std::vector<double> group_softmax(std::span<const double> scores, const Groups& groups);

/// Seeded sorted subset of `count` indices held out for validation.
std::vector<std::size_t> validation_split(std::size_t count, double fraction,
                                          std::uint64_t seed);

/// Seed mixer used to derive independent streams from one user seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// In-place Fisher-Yates with a fixed draw sequence.
void shuffle(std::vector<std::size_t>& v, Rng& rng);

/// Central-difference check of an analytic gradient. `loss` must recompute
/// the scalar loss from the current parameter values; `params` must already
/// hold the analytic gradient. Returns the largest relative error
/// |a - n| / max(|a|, |n|, floor) over the checked entries.
struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_param;
  std::size_t checked = 0;
};
GradCheckResult check_gradients(std::span<const Param> params,
                                const std::function<double()>& loss, double step = 1e-5,
                                double floor = 1e-6);

}  // namespace odflow::nn
