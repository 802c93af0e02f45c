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

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "odflow/csv.hpp"
#include "odflow/error.hpp"
#include "odflow/interpret.hpp"
#include "test_util.hpp"

namespace odflow {
namespace {

/// n contiguous blocks covering all features.
FeatureGrouping blocks(std::size_t n) {
  nlohmann::json j = nlohmann::json::array();
  for (std::size_t b = 0; b < n; ++b) {
    nlohmann::json f = nlohmann::json::array();
    for (std::size_t i = b * kNumFeatures / n; i < (b + 1) * kNumFeatures / n; ++i) f.push_back(i);
    j.push_back({{"name", fmt::format("b{}", b)}, {"features", f}});
  }
  return FeatureGrouping::from_json(j);
}

ValueFn linear_fn(const FeatureVector& w, double b0 = 0.0) {
  return [w, b0](std::span<const FeatureVector> ps) {
    std::vector<double> out;
    for (const auto& p : ps) {
      double s = b0;
      for (std::size_t i = 0; i < kNumFeatures; ++i) s += w[i] * p[i];
      out.push_back(s);
    }
    return out;
  };
}

/// Interactions across groups, so attributions are not additive.
ValueFn nonlinear_fn() {
  return [](std::span<const FeatureVector> ps) {
    std::vector<double> out;
    for (const auto& p : ps) {
      out.push_back(std::tanh(p[0] + 0.5 * p[4] - p[9]) + p[2] * p[15] + std::exp(0.3 * p[21]) * p[12]);
    }
    return out;
  };
}

ValueFn constant_fn(double c) {
  return [c](std::span<const FeatureVector> ps) { return std::vector<double>(ps.size(), c); };
}

double eval1(const ValueFn& f, const FeatureVector& x) {
  return f(std::span<const FeatureVector>(&x, 1)).at(0);
}

TEST(Grouping, AllBedsMergesBedCounts) {
  const auto g = FeatureGrouping::all_beds();
  EXPECT_EQ(g.size(), kNumFeatures - 1);
  const auto it = std::find_if(g.groups.begin(), g.groups.end(),
                               [](const FeatureGroup& x) { return x.name == "All beds"; });
  ASSERT_NE(it, g.groups.end());
  EXPECT_EQ(it->features,
            (std::vector<std::size_t>{feature_index("staffed_all_beds"), feature_index("licensed_all_beds")}));
  EXPECT_EQ(FeatureGrouping::singletons().size(), kNumFeatures);
}

TEST(Grouping, RejectsOverlapAndUnknownNames) {
  EXPECT_THROW(FeatureGrouping::from_json(nlohmann::json::parse(
                   R"([{"name":"a","features":[0,1]},{"name":"b","features":[1]}])")),
               Error);
  EXPECT_THROW(FeatureGrouping::from_json(nlohmann::json::parse(R"([{"name":"a","features":["beds"]}])")),
               Error);
}

TEST(Shapley, DummyGroupGetsZero) {
  std::mt19937_64 rng(1);
  FeatureVector w = test::random_profile(rng);
  for (std::size_t i = 0; i < 4; ++i) w[i] = 0.0;  // block b0 of blocks(5) is features 0..3
  const auto x = test::random_profile(rng);
  const auto b = test::random_profile(rng);
  for (ShapMode m : {ShapMode::kExact, ShapMode::kSampling}) {
    ShapOptions o;
    o.mode = m;
    o.n_permutations = 200;
    const auto r = shapley_values(linear_fn(w), x, b, blocks(5), o);
    EXPECT_EQ(r.phi[0], 0.0);
  }
}

TEST(Shapley, LinearModelClosedForm) {
  std::mt19937_64 rng(2);
  const auto w = test::random_profile(rng);
  const auto x = test::random_profile(rng);
  const auto b = test::random_profile(rng);
  const auto grouping = blocks(11);
  const auto r = shapley_values(linear_fn(w, 0.7), x, b, grouping);
  ASSERT_TRUE(r.exact);
  for (std::size_t g = 0; g < grouping.size(); ++g) {
    double expect = 0.0;
    for (std::size_t i : grouping.groups[g].features) expect += w[i] * (x[i] - b[i]);
    EXPECT_NEAR(r.phi[g], expect, 1e-12) << g;
  }
  // Bed counts merged: the group carries both members' contributions.
  const auto all_beds = FeatureGrouping::all_beds();
  ShapOptions o;
  o.mode = ShapMode::kSampling;
  o.n_permutations = 50;
  const auto s = shapley_values(linear_fn(w), x, b, all_beds, o);
  for (std::size_t g = 0; g < all_beds.size(); ++g) {
    double expect = 0.0;
    for (std::size_t i : all_beds.groups[g].features) expect += w[i] * (x[i] - b[i]);
    EXPECT_NEAR(s.phi[g], expect, 1e-12) << all_beds.groups[g].name;
  }
}

TEST(Shapley, EfficiencyUnderEnumeration) {
  std::mt19937_64 rng(3);
  const auto f = nonlinear_fn();
  for (int t = 0; t < 5; ++t) {
    const auto x = test::random_profile(rng);
    const auto b = test::random_profile(rng);
    const auto r = shapley_values(f, x, b, blocks(9));
    ASSERT_TRUE(r.exact);
    double sum = 0.0;
    for (double p : r.phi) sum += p;
    EXPECT_NEAR(sum, eval1(f, x) - eval1(f, b), 1e-12);
    EXPECT_EQ(r.prediction, eval1(f, x));
    EXPECT_EQ(r.base_value, eval1(f, b));
  }
}

TEST(Shapley, SamplingTracksEnumeration) {
  std::mt19937_64 rng(4);
  const auto f = nonlinear_fn();
  const auto grouping = blocks(8);
  std::vector<FeatureVector> xs;
  for (int t = 0; t < 6; ++t) xs.push_back(test::random_profile(rng));
  const auto b = test::random_profile(rng);
  const auto fx = f(xs);
  const double range = *std::max_element(fx.begin(), fx.end()) - *std::min_element(fx.begin(), fx.end());
  ASSERT_GT(range, 0.0);
  for (const auto& x : xs) {
    ShapOptions ex;
    ex.mode = ShapMode::kExact;
    ShapOptions sm;
    sm.mode = ShapMode::kSampling;
    sm.n_permutations = 2000;
    sm.seed = 9;
    const auto a = shapley_values(f, x, b, grouping, ex);
    const auto s = shapley_values(f, x, b, grouping, sm);
    EXPECT_FALSE(s.exact);
    for (std::size_t g = 0; g < grouping.size(); ++g) EXPECT_LT(std::abs(a.phi[g] - s.phi[g]), 0.02 * range);
  }
}

TEST(Shapley, AutoModeSwitchesOnGroupCount) {
  std::mt19937_64 rng(5);
  const auto x = test::random_profile(rng);
  const auto b = test::random_profile(rng);
  ShapOptions o;
  o.n_permutations = 10;
  EXPECT_TRUE(shapley_values(nonlinear_fn(), x, b, blocks(kMaxExactGroups), o).exact);
  EXPECT_FALSE(shapley_values(nonlinear_fn(), x, b, blocks(kMaxExactGroups + 1), o).exact);
}

TEST(Shapley, SeededSamplingIsDeterministic) {
  std::mt19937_64 rng(6);
  std::vector<FeatureVector> xs{test::random_profile(rng), test::random_profile(rng)};
  const auto b = test::random_profile(rng);
  ShapOptions o;
  o.n_permutations = 100;
  o.seed = 3;
  const auto g = FeatureGrouping::all_beds();
  EXPECT_EQ(shap_summary(nonlinear_fn(), xs, b, g, o).phi, shap_summary(nonlinear_fn(), xs, b, g, o).phi);
}

TEST(Ranking, IgnoredFeaturesTie) {
  FeatureVector w{};
  w[kDriveTimeIndex] = -0.3;
  std::mt19937_64 rng(7);
  std::vector<FeatureVector> xs;
  for (int t = 0; t < 10; ++t) xs.push_back(test::random_profile(rng));
  const auto s = shap_summary(linear_fn(w), xs, FeatureVector{}, blocks(11));
  EXPECT_EQ(s.ranking[0].group, "b10");
  EXPECT_EQ(s.ranking[0].rank, 1u);
  for (std::size_t i = 1; i < s.ranking.size(); ++i) {
    EXPECT_EQ(s.ranking[i].rank, 2u);
    EXPECT_EQ(s.ranking[i].mean_abs_phi, 0.0);
  }
}

TEST(Ranking, MatchesRecomputeFromRowDump) {
  std::mt19937_64 rng(8);
  std::vector<FeatureVector> xs;
  for (int t = 0; t < 7; ++t) xs.push_back(test::random_profile(rng));
  const auto s = shap_summary(nonlinear_fn(), xs, test::random_profile(rng), blocks(10));
  const auto rows = csv::parse(shap_rows_csv(s));
  ASSERT_EQ(rows.header, (std::vector<std::string>{"row", "group", "phi", "feature_value"}));
  std::map<std::string, double> total;
  std::map<std::string, int> count;
  for (const auto& r : rows.rows) {
    total[r[1]] += std::abs(*csv::parse_double(r[2]));
    ++count[r[1]];
  }
  std::vector<std::pair<double, std::string>> order;
  for (const auto& [g, t] : total) order.push_back({-t / count[g], g});
  std::stable_sort(order.begin(), order.end());
  const auto summary = csv::parse(shap_summary_csv(s));
  ASSERT_EQ(summary.rows.size(), order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    EXPECT_EQ(summary.rows[i][0], order[i].second);
    EXPECT_NEAR(*csv::parse_double(summary.rows[i][2]), -order[i].first, 1e-15);
  }
}

TEST(Pdp, ConstantModelIsFlat) {
  const auto grid = default_drive_grid();
  const auto c = pdp_curve(constant_fn(0.125), kDriveTimeIndex, grid, PdpMode::kAtMeans, FeatureVector{});
  for (double v : c.values) EXPECT_EQ(v, 0.125);
}

TEST(Pdp, DefaultGrid) {
  const auto g = default_drive_grid();
  ASSERT_EQ(g.size(), 141u);
  EXPECT_EQ(g.front(), 0.0);
  EXPECT_EQ(g.back(), 70.0);
  EXPECT_EQ(g[71], 35.5);
  EXPECT_THROW(make_grid(0, 10, 0), Error);
}

TEST(Pdp, LinearModelSlope) {
  std::mt19937_64 rng(9);
  const auto w = test::random_profile(rng);
  const auto means = test::random_profile(rng);
  std::vector<FeatureVector> rows;
  for (int t = 0; t < 5; ++t) rows.push_back(test::random_profile(rng));
  const auto grid = make_grid(0, 10, 0.5);
  for (PdpMode m : {PdpMode::kAtMeans, PdpMode::kAveraged}) {
    const auto c = pdp_curve(linear_fn(w), kDriveTimeIndex, grid, m, means, rows);
    for (std::size_t i = 1; i < grid.size(); ++i) {
      EXPECT_NEAR((c.values[i] - c.values[i - 1]) / (grid[i] - grid[i - 1]), w[kDriveTimeIndex], 1e-12);
    }
  }
}

TEST(Pdp, OlsSlopeOnStandardizedScale) {
  const auto ds = test::random_dataset(12, 5, 10);
  auto rows = assemble_features(ds);
  for (auto& r : rows) r.target_share = 0.5 - 0.01 * r.features[kDriveTimeIndex] + 0.02 * r.features[3];
  const auto art = fit_ols(rows);
  const auto [b0, w] = ols_raw_coefficients(art);
  FeatureVector means{};
  std::copy(art.stats.mean.begin(), art.stats.mean.end(), means.begin());
  const auto grid = make_grid(0, 70, 5);
  const auto c = pdp_curve(artifact_value_fn(art), kDriveTimeIndex, grid, PdpMode::kAtMeans, means);
  const double sd = art.stats.std[kDriveTimeIndex];
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double per_sd = (c.values[i] - c.values[i - 1]) / (grid[i] - grid[i - 1]) * sd;
    EXPECT_NEAR(per_sd, w[kDriveTimeIndex] * sd, 1e-9);
    EXPECT_NEAR(per_sd, -0.01 * sd, 1e-9);
  }
}

TEST(Pdp, DecayScenariosOfConstantModelCoincide) {
  const auto rows = assemble_features(test::random_dataset(6, 4, 11));
  const auto stats = fit_feature_stats(rows);
  const auto grid = default_drive_grid();
  const auto curves = decay_scenarios(constant_fn(0.3), stats, feature_index("rating"), grid);
  ASSERT_EQ(curves.size(), 3u);
  EXPECT_EQ(curves[0].scenario, "rating=min");
  EXPECT_EQ(curves[2].scenario, "rating=max");
  EXPECT_EQ(curves[0].values, curves[1].values);
  EXPECT_EQ(curves[1].values, curves[2].values);
  EXPECT_TRUE(find_inflection(curves[0], curves[2]).degenerate);
  try {
    decay_scenarios(constant_fn(0.3), stats, feature_index("median_income"), grid);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kScope);
  }
}

TEST(Pdp, CsvRoundTrip) {
  std::mt19937_64 rng(12);
  const auto w = test::random_profile(rng);
  const auto grid = make_grid(0, 20, 0.5);
  std::vector<PdpCurve> curves{pdp_curve(linear_fn(w), kDriveTimeIndex, grid, PdpMode::kAtMeans, FeatureVector{}),
                               pdp_curve(constant_fn(1.0), kDriveTimeIndex, grid, PdpMode::kAtMeans, FeatureVector{})};
  curves[0].scenario = "a";
  curves[1].scenario = "b";
  const auto back = read_pdp_csv(pdp_csv(curves));
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(back[k].scenario, curves[k].scenario);
    EXPECT_EQ(back[k].grid, curves[k].grid);
    EXPECT_EQ(back[k].values, curves[k].values);
  }
}

PdpCurve curve(std::vector<double> grid, std::vector<double> values) {
  PdpCurve c;
  c.grid = std::move(grid);
  c.values = std::move(values);
  return c;
}

TEST(Inflection, CrossingOnGridPoint) {
  const auto grid = default_drive_grid();
  std::vector<double> a, b;
  for (double t : grid) {
    // Sixty-fourths keep both curves exact, so they meet exactly at 35.
    a.push_back((70.0 - t) / 64.0);
    b.push_back(t / 64.0);
  }
  const auto r = find_inflection(curve(grid, a), curve(grid, b));
  ASSERT_EQ(r.crossings.size(), 1u);
  EXPECT_EQ(r.crossings[0].t, 35.0);
  EXPECT_EQ(r.crossings[0].sign, -1);
  EXPECT_EQ(format_abscissa(r.crossings[0].t), "35.0");

  const auto s = find_inflection(curve(grid, b), curve(grid, a));
  ASSERT_EQ(s.crossings.size(), 1u);
  EXPECT_EQ(s.crossings[0].t, 35.0);
  EXPECT_EQ(s.crossings[0].sign, 1);
}

TEST(Inflection, ParallelCurvesNeverCross) {
  const auto grid = default_drive_grid();
  std::vector<double> a, b;
  for (double t : grid) {
    a.push_back(std::exp(-0.05 * t));
    b.push_back(std::exp(-0.05 * t) + 0.01);
  }
  const auto r = find_inflection(curve(grid, a), curve(grid, b));
  EXPECT_TRUE(r.crossings.empty());
  EXPECT_FALSE(r.degenerate);
}

TEST(Inflection, ThreeCrossingsInterpolated) {
  const std::vector<double> grid{0, 1, 2, 3, 4};
  const auto r = find_inflection(curve(grid, {1, -1, -1, 3, -1}), curve(grid, {0, 0, 0, 0, 0}));
  ASSERT_EQ(r.crossings.size(), 3u);
  EXPECT_EQ(r.crossings[0].t, 0.5);
  EXPECT_EQ(r.crossings[1].t, 2.25);
  EXPECT_EQ(r.crossings[2].t, 3.75);
  EXPECT_EQ(r.crossings[0].sign, -1);
  EXPECT_EQ(r.crossings[1].sign, 1);
  EXPECT_EQ(r.crossings[2].sign, -1);
}

TEST(Inflection, TouchWithoutSignChangeIsNotACrossing) {
  const std::vector<double> grid{0, 1, 2, 3};
  EXPECT_TRUE(find_inflection(curve(grid, {1, 0, 1, 2}), curve(grid, {0, 0, 0, 0})).crossings.empty());
}

TEST(Inflection, MismatchedGridsRejected) {
  try {
    find_inflection(curve({0, 1, 2}, {0, 1, 2}), curve({0, 1, 3}, {2, 1, 0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kGrid);
  }
}

TEST(Inflection, FormatAbscissa) {
  EXPECT_EQ(format_abscissa(35.0), "35.0");
  EXPECT_EQ(format_abscissa(19.25), "19.25");
  EXPECT_EQ(format_abscissa(0.1), "0.1");
}

}  // namespace
}  // namespace odflow
