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
#include <map>

#include <gtest/gtest.h>

#include "odflow/error.hpp"
#include "odflow/features.hpp"
#include "test_util.hpp"

namespace odflow {
namespace {

TEST(Normalize, SharesPerOrigin) {
  std::vector<FlowRecord> flows{{"z", "a", 10, 1}, {"z", "b", 30, 1}, {"z", "c", 60, 1},
                                {"y", "a", 7, 1}};
  const auto s = normalize_per_origin(flows);
  EXPECT_DOUBLE_EQ(s.at({"z", "a"}), 0.1);
  EXPECT_DOUBLE_EQ(s.at({"z", "b"}), 0.3);
  EXPECT_DOUBLE_EQ(s.at({"z", "c"}), 0.6);
  EXPECT_EQ(s.at({"y", "a"}), 1.0);
}

TEST(Normalize, ZeroTotalIsDegenerate) {
  std::vector<FlowRecord> flows{{"z", "a", 0, 1}, {"z", "b", 0, 1}};
  try {
    normalize_per_origin(flows);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateOrigin);
  }
}

TEST(Assemble, AllPairsCount) {
  const auto ds = test::random_dataset(2, 3, 5);
  const auto rows = assemble_features(ds);
  ASSERT_EQ(rows.size(), 6u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.features.size(), 22u);
    EXPECT_EQ(r.features[kDriveTimeIndex], *ds.find_drive_time(r.origin_zone_id, r.hospital_id));
  }
}

TEST(Assemble, FeatureLayout) {
  const auto ds = test::random_dataset(1, 1, 6);
  const auto row = assemble_features(ds).at(0);
  const auto& h = ds.hospitals()[0];
  const auto& z = ds.zones()[0];
  EXPECT_EQ(row.features[feature_index("staffed_all_beds")], h.staffed_all_beds);
  EXPECT_EQ(row.features[feature_index("rating")], h.rating);
  EXPECT_EQ(row.features[feature_index("median_income")], z.median_income);
  EXPECT_EQ(row.features[feature_index("zone_lat")], z.lat);
  EXPECT_EQ(feature_index("drive_time_min"), 21u);
  EXPECT_TRUE(is_hospital_feature(feature_index("rating")));
  EXPECT_FALSE(is_hospital_feature(feature_index("pct_over65")));
  EXPECT_THROW(feature_index("distance"), Error);
}

TEST(Assemble, CandidatesCoverEveryHospital) {
  const auto ds = test::random_dataset(6, 4, 7, 0.5);
  const auto rows = assemble_candidates(ds);
  EXPECT_EQ(rows.size(), ds.flow_origins().size() * 4);
  std::map<std::string, double> total;
  for (const auto& r : rows) total[r.origin_zone_id] += r.target_share;
  for (const auto& [o, t] : total) EXPECT_NEAR(t, 1.0, 1e-12) << o;
}

TEST(Standardize, FittingSetHasUnitMoments) {
  const auto rows = assemble_features(test::random_dataset(15, 6, 8));
  const auto stats = fit_feature_stats(rows);
  const auto z = standardize(rows, stats);
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    double m = 0;
    for (const auto& r : z) m += r.features[j];
    m /= z.size();
    double ss = 0;
    for (const auto& r : z) ss += (r.features[j] - m) * (r.features[j] - m);
    EXPECT_NEAR(m, 0.0, 1e-10) << j;
    EXPECT_NEAR(std::sqrt(ss / (z.size() - 1)), 1.0, 1e-10) << j;
  }
}

TEST(Standardize, ConstantColumnAndMean) {
  auto rows = assemble_features(test::random_dataset(4, 3, 9));
  for (auto& r : rows) r.features[3] = 0.5;
  const auto stats = fit_feature_stats(rows);
  EXPECT_TRUE(stats.is_constant(3));
  for (const auto& r : standardize(rows, stats)) EXPECT_EQ(r.features[3], 0.0);

  std::vector<double> at_mean(stats.mean.begin(), stats.mean.end());
  for (double v : standardize(at_mean, stats)) EXPECT_EQ(v, 0.0);
}

TEST(Standardize, RoundTrip) {
  const auto rows = assemble_features(test::random_dataset(5, 5, 10));
  const auto stats = fit_feature_stats(rows);
  const std::vector<double> x(rows[3].features.begin(), rows[3].features.end());
  const auto back = destandardize(standardize(x, stats), stats);
  for (std::size_t j = 0; j < x.size(); ++j) EXPECT_NEAR(back[j], x[j], 1e-9 * (1 + std::abs(x[j])));
}

}  // namespace
}  // namespace odflow
