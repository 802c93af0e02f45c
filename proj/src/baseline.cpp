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

// Least-squares and gradient-boosted tree regressors.

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "odflow/error.hpp"
#include "odflow/model.hpp"

namespace odflow {

ModelArtifact fit_ols(std::span<const FeatureRow> rows, double ridge_eps) {
  if (rows.size() < 2) {
    raise(ErrorCode::kInsufficientData,
          fmt::format("least squares needs at least 2 rows, got {}", rows.size()));
  }
  if (!(ridge_eps >= 0.0)) raise(ErrorCode::kConfig, "ridge_eps must be >= 0");

  ModelArtifact art;
  art.family = Family::kOls;
  art.stats = fit_feature_stats(rows);
  const nn::Matrix x = feature_matrix(rows, art.stats);
  const auto n = static_cast<Eigen::Index>(rows.size());

  std::vector<Eigen::Index> active;
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    if (!art.stats.is_constant(j)) active.push_back(static_cast<Eigen::Index>(j));
  }
  const auto p = static_cast<Eigen::Index>(active.size());

  long double ysum = 0.0L;
  for (const auto& r : rows) ysum += r.target_share;
  const double ymean = static_cast<double>(ysum / static_cast<long double>(n));

  Eigen::MatrixXd xa(n, p);
  for (Eigen::Index c = 0; c < p; ++c) xa.col(c) = x.col(active[c]);
  // Centre columns exactly so the intercept decouples from the slopes.
  const Eigen::RowVectorXd col_mean = xa.colwise().mean();
  xa.rowwise() -= col_mean;
  Eigen::VectorXd yc(n);
  for (Eigen::Index i = 0; i < n; ++i) yc(i) = rows[i].target_share - ymean;

  OlsParams params;
  params.ridge_eps = ridge_eps;
  params.coef.assign(kNumFeatures, 0.0);
  if (p > 0) {
    Eigen::MatrixXd gram = xa.transpose() * xa;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    const double hi = eig.eigenvalues().maxCoeff();
    const double lo = eig.eigenvalues().minCoeff();
    params.singular = !(hi > 0.0) || lo <= 1e-12 * hi;
    gram.diagonal().array() += ridge_eps;
    const Eigen::VectorXd w = gram.ldlt().solve(xa.transpose() * yc);
    double shift = 0.0;
    for (Eigen::Index c = 0; c < p; ++c) {
      params.coef[static_cast<std::size_t>(active[c])] = w(c);
      shift += w(c) * col_mean(c);
    }
    params.intercept = ymean - shift;
  } else {
    params.intercept = ymean;
  }

  art.metadata["seed"] = 0;
  art.metadata["ridge_eps"] = ridge_eps;
  art.metadata["regularized"] = ridge_eps > 0.0;
  art.metadata["singular"] = params.singular;
  art.metadata["n_rows"] = rows.size();
  std::vector<double> fitted(rows.size());
  art.params = std::move(params);
  fitted = predict(art, rows);
  std::vector<double> target(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) target[i] = rows[i].target_share;
  art.metadata["final_train_loss"] = nn::mse_loss(fitted, target, nullptr);
  return art;
}

double Tree::eval(std::span<const double> x) const {
  int k = 0;
  while (nodes[static_cast<std::size_t>(k)].feature >= 0) {
    const auto& nd = nodes[static_cast<std::size_t>(k)];
    k = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
  }
  return nodes[static_cast<std::size_t>(k)].value;
}

namespace {

/// Exact running sum of doubles held as nonoverlapping partials; value()
/// rounds once at the end.
class ExactSum {
 public:
  void add(double x) {
    std::size_t k = 0;
    for (double y : partials_) {
      if (std::abs(x) < std::abs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials_[k++] = lo;
      x = hi;
    }
    partials_.resize(k);
    partials_.push_back(x);
  }

  double value() const {
    if (partials_.empty()) return 0.0;
    std::size_t n = partials_.size() - 1;
    double hi = partials_[n];
    double lo = 0.0;
    while (n > 0) {
      const double x = hi;
      const double y = partials_[--n];
      hi = x + y;
      lo = y - (hi - x);
      if (lo != 0.0) break;
    }
    // Half-way case: the remaining partials decide the rounding direction.
    if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) || (lo > 0.0 && partials_[n - 1] > 0.0))) {
      const double y = 2.0 * lo;
      const double x = hi + y;
      if (y == x - hi) hi = x;
    }
    return hi;
  }

 private:
  std::vector<double> partials_;
};

struct SplitChoice {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

/// Grows one regression tree on residuals with exact greedy splits. Ties go
/// to the lowest feature index, then the lowest threshold.
Tree grow_tree(const nn::Matrix& x, const std::vector<std::vector<std::size_t>>& order,
               const std::vector<double>& resid, std::span<const FeatureRow> rows,
               const std::vector<double>& fitted, const GbtConfig& cfg) {
  const std::size_t n = resid.size();
  const std::size_t p = static_cast<std::size_t>(x.cols());
  Tree tree;
  tree.nodes.push_back({});
  std::vector<int> node_of(n, 0);
  std::vector<int> frontier = {0};

  // Leaf means use unrounded residuals, so a leaf whose rows are already
  // fitted at their mean contributes nothing beyond the last bit.
  auto leaf_value = [&](int node) {
    ExactSum s;
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (node_of[i] == node) {
        s.add(rows[i].target_share);
        s.add(-fitted[i]);
        ++c;
      }
    }
    return c == 0 ? 0.0 : s.value() / static_cast<double>(c);
  };

  for (int depth = 0; depth < cfg.max_depth && !frontier.empty(); ++depth) {
    // Local slot for each frontier node.
    std::vector<int> slot(tree.nodes.size(), -1);
    for (std::size_t s = 0; s < frontier.size(); ++s) slot[frontier[s]] = static_cast<int>(s);
    const std::size_t m = frontier.size();
    std::vector<double> total_sum(m, 0.0);
    std::vector<std::size_t> total_cnt(m, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const int s = node_of[i] < static_cast<int>(slot.size()) ? slot[node_of[i]] : -1;
      if (s < 0) continue;
      total_sum[s] += resid[i];
      total_cnt[s] += 1;
    }
    std::vector<SplitChoice> best(m);
    std::vector<double> left_sum(m);
    std::vector<std::size_t> left_cnt(m);
    std::vector<double> last(m);
    for (std::size_t j = 0; j < p; ++j) {
      std::fill(left_sum.begin(), left_sum.end(), 0.0);
      std::fill(left_cnt.begin(), left_cnt.end(), 0);
      for (std::size_t i : order[j]) {
        const int s = node_of[i] < static_cast<int>(slot.size()) ? slot[node_of[i]] : -1;
        if (s < 0) continue;
        const double v = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        const std::size_t nl = left_cnt[s];
        const std::size_t nr = total_cnt[s] - nl;
        if (nl > 0 && v > last[s] && nl >= static_cast<std::size_t>(cfg.min_samples_leaf) &&
            nr >= static_cast<std::size_t>(cfg.min_samples_leaf)) {
          const double sl = left_sum[s];
          const double sr = total_sum[s] - sl;
          const double gain = sl * sl / static_cast<double>(nl) + sr * sr / static_cast<double>(nr) -
                              total_sum[s] * total_sum[s] / static_cast<double>(total_cnt[s]);
          if (gain > best[s].gain) {
            double thr = 0.5 * (last[s] + v);
            if (!(thr < v)) thr = last[s];
            best[s] = {gain, static_cast<int>(j), thr};
          }
        }
        left_sum[s] += resid[i];
        left_cnt[s] += 1;
        last[s] = v;
      }
    }
    std::vector<int> next;
    for (std::size_t s = 0; s < m; ++s) {
      if (best[s].feature < 0) continue;
      const int node = frontier[s];
      const int l = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back({});
      tree.nodes.push_back({});
      auto& nd = tree.nodes[static_cast<std::size_t>(node)];
      nd.feature = best[s].feature;
      nd.threshold = best[s].threshold;
      nd.left = l;
      nd.right = l + 1;
      next.push_back(l);
      next.push_back(l + 1);
    }
    if (next.empty()) break;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& nd = tree.nodes[static_cast<std::size_t>(node_of[i])];
      if (nd.feature >= 0 && nd.left >= 0 && node_of[i] < static_cast<int>(slot.size()) &&
          slot[node_of[i]] >= 0) {
        node_of[i] = x(static_cast<Eigen::Index>(i), nd.feature) <= nd.threshold ? nd.left
                                                                                  : nd.right;
      }
    }
    frontier = std::move(next);
  }
  for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
    if (tree.nodes[k].feature < 0) {
      tree.nodes[k].value = cfg.learning_rate * leaf_value(static_cast<int>(k));
    }
  }
  return tree;
}

}  // namespace

ModelArtifact fit_gbt(std::span<const FeatureRow> rows, const GbtConfig& cfg,
                      std::uint64_t seed) {
  if (cfg.n_stages < 1) raise(ErrorCode::kConfig, "n_stages must be >= 1");
  if (!(cfg.learning_rate > 0.0 && cfg.learning_rate <= 1.0)) {
    raise(ErrorCode::kConfig, "learning_rate must lie in (0, 1]");
  }
  if (cfg.max_depth < 0) raise(ErrorCode::kConfig, "max_depth must be >= 0");
  if (cfg.min_samples_leaf < 1) raise(ErrorCode::kConfig, "min_samples_leaf must be >= 1");
  if (rows.empty()) raise(ErrorCode::kInsufficientData, "boosting needs at least 1 row");

  ModelArtifact art;
  art.family = Family::kGbt;
  art.stats = fit_feature_stats(rows);
  const nn::Matrix x = feature_matrix(rows, art.stats);
  const std::size_t n = rows.size();

  std::vector<std::vector<std::size_t>> order(kNumFeatures);
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    order[j].resize(n);
    std::iota(order[j].begin(), order[j].end(), 0);
    std::stable_sort(order[j].begin(), order[j].end(), [&](std::size_t a, std::size_t b) {
      return x(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(j)) <
             x(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(j));
    });
  }

  GbtParams params;
  params.learning_rate = cfg.learning_rate;
  ExactSum ysum;
  for (const auto& r : rows) ysum.add(r.target_share);
  params.base = ysum.value() / static_cast<double>(n);

  std::vector<double> fitted(n, params.base);
  std::vector<double> resid(n);
  for (int stage = 0; stage < cfg.n_stages; ++stage) {
    for (std::size_t i = 0; i < n; ++i) resid[i] = rows[i].target_share - fitted[i];
    Tree tree = grow_tree(x, order, resid, rows, fitted, cfg);
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = x.row(static_cast<Eigen::Index>(i));
      fitted[i] += tree.eval(std::span<const double>(row.data(), kNumFeatures));
      const double d = rows[i].target_share - fitted[i];
      sse += d * d;
    }
    params.stage_mse.push_back(sse / static_cast<double>(n));
    params.trees.push_back(std::move(tree));
  }

  art.metadata["seed"] = seed;
  art.metadata["n_stages"] = cfg.n_stages;
  art.metadata["max_depth"] = cfg.max_depth;
  art.metadata["learning_rate"] = cfg.learning_rate;
  art.metadata["min_samples_leaf"] = cfg.min_samples_leaf;
  art.metadata["final_train_loss"] = params.stage_mse.back();
  art.params = std::move(params);
  return art;
}

std::pair<double, std::vector<double>> ols_raw_coefficients(const ModelArtifact& art) {
  const auto* p = std::get_if<OlsParams>(&art.params);
  if (!p) raise(ErrorCode::kConfig, "artifact is not a least-squares model");
  std::vector<double> w(kNumFeatures, 0.0);
  double b = p->intercept;
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    if (art.stats.is_constant(j)) continue;
    w[j] = p->coef[j] / art.stats.std[j];
    b -= w[j] * art.stats.mean[j];
  }
  return {b, w};
}

}  // namespace odflow
