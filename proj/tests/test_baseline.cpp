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

#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "odflow/error.hpp"
#include "odflow/model.hpp"
#include "test_util.hpp"

namespace odflow {
namespace {

/// Rows with random features and y = 2 x0 - x1 + 3.
std::vector<FeatureRow> exact_linear_rows(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<FeatureRow> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    rows[i].origin_zone_id = fmt::format("z{}", i);
    rows[i].hospital_id = "h";
    rows[i].features = test::random_profile(rng);
    rows[i].target_share = 2.0 * rows[i].features[0] - rows[i].features[1] + 3.0;
  }
  return rows;
}

std::vector<double> targets(const std::vector<FeatureRow>& rows) {
  std::vector<double> y;
  for (const auto& r : rows) y.push_back(r.target_share);
  return y;
}

TEST(Ols, RecoversExactLinearModel) {
  const auto rows = exact_linear_rows(200, 1);
  const auto art = fit_ols(rows);
  const auto [b0, w] = ols_raw_coefficients(art);
  EXPECT_NEAR(b0, 3.0, 1e-8);
  EXPECT_NEAR(w[0], 2.0, 1e-8);
  EXPECT_NEAR(w[1], -1.0, 1e-8);
  for (std::size_t j = 2; j < w.size(); ++j) EXPECT_NEAR(w[j], 0.0, 1e-8) << j;

  // Normal-equation oracle on the raw design.
  Eigen::MatrixXd X(rows.size(), kNumFeatures + 1);
  Eigen::VectorXd y(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    X(i, 0) = 1.0;
    for (std::size_t j = 0; j < kNumFeatures; ++j) X(i, j + 1) = rows[i].features[j];
    y(i) = rows[i].target_share;
  }
  const Eigen::VectorXd beta = (X.transpose() * X).ldlt().solve(X.transpose() * y);
  EXPECT_NEAR(b0, beta(0), 1e-8);
  for (std::size_t j = 0; j < kNumFeatures; ++j) EXPECT_NEAR(w[j], beta(j + 1), 1e-8);

  const auto pred = predict(art, rows);
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_NEAR(pred[i], rows[i].target_share, 1e-8);
}

TEST(Ols, ConstantTarget) {
  auto rows = exact_linear_rows(50, 2);
  for (auto& r : rows) r.target_share = 0.25;
  const auto [b0, w] = ols_raw_coefficients(fit_ols(rows));
  EXPECT_NEAR(b0, 0.25, 1e-12);
  for (double c : w) EXPECT_NEAR(c, 0.0, 1e-12);
}

TEST(Ols, DuplicatedColumnIsFlagged) {
  auto rows = exact_linear_rows(60, 3);
  for (auto& r : rows) r.features[5] = r.features[4];
  const auto art = fit_ols(rows);
  EXPECT_TRUE(art.metadata.at("singular").get<bool>());
  for (double p : predict(art, rows)) EXPECT_TRUE(std::isfinite(p));
}

TEST(Gbt, SingleDepthZeroStageIsMean) {
  auto rows = exact_linear_rows(37, 4);
  GbtConfig c;
  c.n_stages = 1;
  c.max_depth = 0;
  c.learning_rate = 1.0;
  const auto art = fit_gbt(rows, c, 0);
  __float128 sum = 0;
  for (const auto& r : rows) sum += r.target_share;
  const double mean = static_cast<double>(sum / rows.size());
  for (double p : predict(art, rows)) EXPECT_EQ(p, mean);
}

TEST(Gbt, FitsPlateaus) {
  std::mt19937_64 rng(5);
  std::vector<FeatureRow> rows(200);
  for (auto& r : rows) {
    r.origin_zone_id = "z";
    r.features = test::random_profile(rng);
    const double x = r.features[2];
    r.target_share = x < -0.5 ? 1.0 : x < 0.0 ? 3.0 : x < 0.5 ? -2.0 : 0.5;
  }
  GbtConfig c;
  c.n_stages = 50;
  c.max_depth = 2;
  c.learning_rate = 1.0;
  const auto art = fit_gbt(rows, c, 0);
  const auto pred = predict(art, rows);
  double mse = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) mse += std::pow(pred[i] - rows[i].target_share, 2);
  EXPECT_LT(mse / rows.size(), 1e-6);
}

TEST(Gbt, TrainingMseNonincreasing) {
  auto rows = exact_linear_rows(120, 6);
  std::mt19937_64 rng(6);
  for (auto& r : rows) r.target_share += test::unif(rng, -1, 1);
  GbtConfig c;
  c.n_stages = 100;
  const auto art = fit_gbt(rows, c, 0);
  const auto& s = std::get<GbtParams>(art.params).stage_mse;
  ASSERT_EQ(s.size(), 100u);
  for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LE(s[i], s[i - 1]) << i;
}

TEST(Predict, EmptyAndDeterministic) {
  const auto rows = exact_linear_rows(40, 7);
  GbtConfig c;
  c.n_stages = 30;
  const auto art = fit_gbt(rows, c, 0);
  EXPECT_TRUE(predict(art, std::span<const FeatureRow>{}).empty());
  EXPECT_EQ(predict(art, rows), predict(art, rows));
}

TEST(Artifact, JsonRoundTripPreservesPredictions) {
  const auto rows = exact_linear_rows(40, 8);
  GbtConfig c;
  c.n_stages = 10;
  for (const auto& art : {fit_ols(rows), fit_gbt(rows, c, 0)}) {
    const auto back = artifact_from_json(nlohmann::json::parse(artifact_to_json(art).dump()));
    EXPECT_EQ(predict(back, rows), predict(art, rows));
  }
}

TEST(Config, ParsesAndRejects) {
  const auto cfg = config_from_json({{"family", "gbt"}, {"n_stages", 7}});
  EXPECT_EQ(config_family(cfg), Family::kGbt);
  EXPECT_EQ(std::get<GbtConfig>(cfg).n_stages, 7);
  EXPECT_EQ(config_to_json(config_from_json(config_to_json(cfg))), config_to_json(cfg));
  try {
    config_from_json({{"family", "mlp"}, {"hiden_sizes", {3}}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
    EXPECT_NE(std::string(e.what()).find("hiden_sizes"), std::string::npos);
  }
  EXPECT_THROW(config_from_json({{"family", "random_forest"}}), Error);
}

}  // namespace
}  // namespace odflow
