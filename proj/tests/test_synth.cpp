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

#include "odflow/csv.hpp"
#include "odflow/error.hpp"
#include "odflow/synth.hpp"
#include "test_util.hpp"

namespace odflow {
namespace {

SynthConfig small(std::uint64_t seed = 1) {
  SynthConfig c;
  c.n_zones = 40;
  c.n_hospitals = 6;
  c.seed = seed;
  return c;
}

TEST(Synth, NoDecayIdenticalHospitalsAreUniform) {
  auto c = small();
  c.identical_hospitals = true;
  c.beta_per_min = 0.0;
  c.theta_rating = c.theta_near = 0.0;
  const auto city = generate_city(c);
  for (const auto& row : city.truth.true_share)
    for (double s : row) EXPECT_EQ(s, 1.0 / 6.0);
}

TEST(Synth, SteepDecayPicksNearest) {
  auto c = small();
  c.beta_per_min = 10.0;
  c.jitter_min = 0.0;
  const auto city = generate_city(c);
  const auto& ds = city.dataset;
  for (std::size_t z = 0; z < city.truth.zone_ids.size(); ++z) {
    std::size_t nearest = 0;
    double best = 1e300;
    for (std::size_t h = 0; h < city.truth.hospital_ids.size(); ++h) {
      const double t = *ds.find_drive_time(city.truth.zone_ids[z], city.truth.hospital_ids[h]);
      if (t < best) {
        best = t;
        nearest = h;
      }
    }
    // Skip near-ties, where two hospitals are within a fraction of a minute.
    double second = 1e300;
    for (std::size_t h = 0; h < city.truth.hospital_ids.size(); ++h) {
      if (h == nearest) continue;
      second = std::min(second, *ds.find_drive_time(city.truth.zone_ids[z], city.truth.hospital_ids[h]));
    }
    if (second - best < 1.0) continue;
    EXPECT_GT(city.truth.true_share[z][nearest], 0.99) << city.truth.zone_ids[z];
  }
}

TEST(Synth, TrueSharesMatchUtilityOracle) {
  auto c = small(2);
  c.theta_near = -c.theta_rating;
  const auto city = generate_city(c);
  const auto& ds = city.dataset;
  for (std::size_t z = 0; z < city.truth.zone_ids.size(); ++z) {
    std::vector<double> u;
    for (const auto& h : ds.hospitals()) {
      const double d = *ds.find_drive_time(city.truth.zone_ids[z], h.hospital_id);
      const double rating_w = d > c.tau_min ? c.theta_rating : c.theta_near;
      u.push_back(c.theta_size * std::log(1.0 + h.staffed_all_beds) + rating_w * h.rating +
                  c.theta_occupancy * h.all_bed_occupancy - c.beta_per_min * d);
    }
    double zsum = 0;
    for (double v : u) zsum += std::exp(v);
    for (std::size_t h = 0; h < u.size(); ++h) {
      EXPECT_NEAR(city.truth.true_share[z][h], std::exp(u[h]) / zsum, 1e-12);
    }
  }
}

TEST(Synth, NoiselessOracleIsPerfect) {
  const auto city = generate_city(small(3));
  EXPECT_NEAR(city.truth.achievable.cpc, 1.0, 1e-12);
  EXPECT_NEAR(city.truth.achievable.nrmse, 0.0, 1e-10);
}

TEST(Synth, MultinomialOracleIsImperfect) {
  auto c = small(4);
  c.noise = NoiseMode::kMultinomial;
  c.sample_count = 50;
  const auto city = generate_city(c);
  EXPECT_LT(city.truth.achievable.cpc, 1.0);
  EXPECT_GT(city.truth.achievable.cpc, 0.5);
  for (const auto& r : city.records) EXPECT_EQ(r.visits, std::round(r.visits));
}

TEST(Synth, SameSeedSameBytes) {
  test::TempDir a("synth_a"), b("synth_b");
  auto c = small(5);
  c.noise = NoiseMode::kMultinomial;
  write_city(generate_city(c), c, a.path());
  write_city(generate_city(c), c, b.path());
  for (const char* f : {"zones.csv", "hospitals.csv", "flows.csv", "drivetime.csv", "truth.csv", "oracle.json"}) {
    EXPECT_EQ(csv::read_file(a / f), csv::read_file(b / f)) << f;
  }
  c.seed = 6;
  test::TempDir d("synth_d");
  write_city(generate_city(c), c, d.path());
  EXPECT_NE(csv::read_file(a / "flows.csv"), csv::read_file(d / "flows.csv"));
}

TEST(Synth, TruthValueFnCrossesAtThreshold) {
  UtilityParams p{0.6, 0.8, -0.8, 1.0, 19.0, 0.1};
  const auto rows = assemble_features(generate_city(small(7)).dataset);
  const auto stats = fit_feature_stats(rows);
  FeatureVector ref{};
  std::copy(stats.mean.begin(), stats.mean.end(), ref.begin());
  const auto curves = decay_scenarios(truth_value_fn(p, ref, 6), stats, feature_index("rating"),
                                      default_drive_grid());
  const auto r = find_inflection(curves[0], curves[2]);
  ASSERT_EQ(r.crossings.size(), 1u);
  EXPECT_GE(r.crossings[0].t, 19.0);
  EXPECT_LE(r.crossings[0].t, 19.5);
}

TEST(Synth, RejectsBadConfig) {
  auto c = small();
  c.n_hospitals = 0;
  EXPECT_THROW(generate_city(c), Error);
  c = small();
  c.side_km = 0.0;
  EXPECT_THROW(generate_city(c), Error);
  EXPECT_THROW(synth_config_from_json({{"n_zone", 3}}), Error);
  const auto j = synth_config_to_json(small(9));
  EXPECT_EQ(synth_config_to_json(synth_config_from_json(j)), j);
}

}  // namespace
}  // namespace odflow
