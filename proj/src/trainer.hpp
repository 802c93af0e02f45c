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

// Minibatch training loop shared by the row-scored neural families.

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <fmt/format.h>

#include "odflow/error.hpp"
#include "odflow/features.hpp"
#include "odflow/model.hpp"
#include "odflow/nn.hpp"

namespace odflow::detail {

struct TrainOptions {
  int epochs = 1;
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
  Objective objective = Objective::kMse;
};

struct TrainOutcome {
  std::vector<LossPoint> curve;
  std::size_t train_units = 0;
  std::size_t val_units = 0;
};

/// Units are rows (MSE) or origin groups (softmax). Gathers the rows of a
/// unit list into a dense batch plus local softmax groups.
struct UnitBatch {
  std::vector<std::size_t> rows;
  nn::Groups groups;
};

inline UnitBatch gather_units(const std::vector<std::vector<std::size_t>>& units,
                              std::span<const std::size_t> pick) {
  UnitBatch b;
  for (std::size_t u : pick) {
    std::vector<std::size_t> local;
    for (std::size_t r : units[u]) {
      local.push_back(b.rows.size());
      b.rows.push_back(r);
    }
    b.groups.push_back(std::move(local));
  }
  return b;
}

inline nn::Matrix take_rows(const nn::Matrix& x, const std::vector<std::size_t>& rows) {
  nn::Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

inline double batch_loss(Objective obj, std::span<const double> scores,
                         std::span<const double> target, const nn::Groups& groups,
                         std::vector<double>* grad) {
  return obj == Objective::kSoftmax ? nn::softmax_ce_loss(scores, target, groups, grad)
                                    : nn::mse_loss(scores, target, grad);
}

/// `Net` provides forward(Matrix) -> scores, infer(Matrix) const,
/// backward(span<const double>), zero_grad() and params().
template <typename Net>
TrainOutcome train_units(Net& net, const nn::Matrix& x, const std::vector<double>& y,
                         const std::vector<std::vector<std::size_t>>& units,
                         const TrainOptions& opt) {
  TrainOutcome out;
  const auto val = nn::validation_split(units.size(), opt.validation_fraction, opt.seed);
  std::vector<std::size_t> train_ids;
  {
    std::size_t k = 0;
    for (std::size_t u = 0; u < units.size(); ++u) {
      if (k < val.size() && val[k] == u) {
        ++k;
      } else {
        train_ids.push_back(u);
      }
    }
  }
  out.train_units = train_ids.size();
  out.val_units = val.size();
  const UnitBatch train_all = gather_units(units, train_ids);
  const UnitBatch val_all = gather_units(units, val);
  const nn::Matrix x_train = take_rows(x, train_all.rows);
  const nn::Matrix x_val = take_rows(x, val_all.rows);
  auto targets_of = [&](const UnitBatch& b) {
    std::vector<double> t(b.rows.size());
    for (std::size_t i = 0; i < b.rows.size(); ++i) t[i] = y[b.rows[i]];
    return t;
  };
  const std::vector<double> y_train = targets_of(train_all);
  const std::vector<double> y_val = targets_of(val_all);

  auto params = net.params();
  nn::Adam adam(opt.learning_rate);
  nn::Rng rng(nn::mix_seed(opt.seed, 1));
  std::vector<std::size_t> perm = train_ids;
  std::vector<double> grad;
  for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
    nn::shuffle(perm, rng);
    std::size_t pos = 0;
    while (pos < perm.size()) {
      std::size_t end = pos;
      std::size_t rows_in_batch = 0;
      while (end < perm.size() && (end == pos || rows_in_batch < opt.batch_size)) {
        rows_in_batch += units[perm[end]].size();
        ++end;
      }
      const UnitBatch b =
          gather_units(units, std::span<const std::size_t>(perm.data() + pos, end - pos));
      pos = end;
      const nn::Matrix xb = take_rows(x, b.rows);
      const std::vector<double> yb = targets_of(b);
      net.zero_grad();
      const std::vector<double> scores = net.forward(xb);
      const double loss = batch_loss(opt.objective, scores, yb, b.groups, &grad);
      if (!std::isfinite(loss)) {
        raise(ErrorCode::kDivergence, fmt::format("non-finite training loss at epoch {}", epoch));
      }
      net.backward(grad);
      adam.step(params);
    }
    LossPoint lp;
    lp.epoch = epoch;
    lp.train_loss = batch_loss(opt.objective, net.infer(x_train), y_train, train_all.groups,
                               nullptr);
    lp.val_loss = val.empty() ? std::numeric_limits<double>::quiet_NaN()
                              : batch_loss(opt.objective, net.infer(x_val), y_val,
                                           val_all.groups, nullptr);
    if (!std::isfinite(lp.train_loss)) {
      raise(ErrorCode::kDivergence, fmt::format("non-finite training loss at epoch {}", epoch));
    }
    out.curve.push_back(lp);
  }
  return out;
}

}  // namespace odflow::detail
