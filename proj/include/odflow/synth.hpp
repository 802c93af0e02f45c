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
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "odflow/dataset.hpp"
#include "odflow/evaluation.hpp"
#include "odflow/ingest.hpp"
#include "odflow/interpret.hpp"

namespace odflow {

enum class NoiseMode { kNone, kMultinomial };

/// Synthetic city on a square plane. Hospital choice follows a softmax of
///   u = theta_size log(1 + beds) + theta_rating rating 1[d > tau]
///       + theta_near rating 1[d <= tau] + theta_occupancy occ - beta d
/// where beds are staffed beds, occ the all-bed occupancy and d drive time.
struct SynthConfig {
  std::size_t n_zones = 200;
  std::size_t n_hospitals = 10;
  double side_km = 50.0;
  double speed_km_per_min = 1.0;
  double jitter_min = 2.0;  // uniform extra minutes per pair
  double min_drive_min = 0.5;

  // Attribute ranges.
  double beds_min = 20.0, beds_max = 1403.0;
  double occupancy_min = 0.3, occupancy_max = 0.92;
  double reviews_min = 2.0, reviews_max = 3763.0;
  double rating_min = 1.0, rating_max = 4.8;
  double population_min = 300.0, population_max = 5000.0;
  double income_min = 20000.0, income_max = 200000.0;
  /// All hospitals share one attribute draw (locations still differ).
  bool identical_hospitals = false;

  double theta_size = 0.6;
  double theta_rating = 0.4;
  double theta_near = 0.0;
  double theta_occupancy = 1.0;
  double tau_min = 19.0;
  double beta_per_min = 0.1;

  /// Yearly outflow per zone is drawn from [outflow_min, outflow_max].
  double outflow_min = 200.0, outflow_max = 2000.0;
  NoiseMode noise = NoiseMode::kNone;
  /// Multinomial visits drawn per zone and year.
  std::size_t sample_count = 100;
  PeriodConfig period;

  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json synth_config_to_json(const SynthConfig& c);
SynthConfig synth_config_from_json(const nlohmann::json& j, const std::string& path = "synth");

struct UtilityParams {
  double theta_size = 0.0;
  double theta_rating = 0.0;
  double theta_near = 0.0;
  double theta_occupancy = 0.0;
  double tau_min = 0.0;
  double beta_per_min = 0.0;

  double utility(double staffed_beds, double rating, double occupancy, double drive_min) const;
  /// Utility of a 22-feature profile.
  double utility(const FeatureVector& profile) const;
};

struct GroundTruth {
  UtilityParams params;
  std::vector<std::string> zone_ids;  // sorted
  std::vector<std::string> hospital_ids;
  /// true_share[z][h], each row a probability vector.
  std::vector<std::vector<double>> true_share;
  /// Metrics of the true shares against the generated observations.
  MetricTriple achievable;

  double share(const std::string& zone_id, const std::string& hospital_id) const;
};

struct SynthCity {
  ODDataset dataset;
  GroundTruth truth;
  std::vector<RawVisitRecord> records;  // yearly visit records behind the flows
};

SynthCity generate_city(const SynthConfig& config);

/// True-share predictor scored against the observed shares of `dataset`.
MetricTriple oracle_report(const GroundTruth& truth, const ODDataset& dataset);

/// Single-profile share under the true utility, in a reference choice set of
/// `choice_size` hospitals whose other members sit at `reference`.
ValueFn truth_value_fn(const UtilityParams& params, const FeatureVector& reference,
                       double choice_size);

/// zones.csv, hospitals.csv, flows.csv, drivetime.csv, truth.csv, oracle.json.
void write_city(const SynthCity& city, const SynthConfig& config, const std::filesystem::path& dir);
std::string truth_csv(const GroundTruth& truth);

/// County-scale ingest fixture: 2,830 zones, 35 hospitals and 16,783
/// observed flows, 53 of which leave the origin `kOutlierOrigin`. That
/// origin also reaches 18 out-of-area facilities, since 53 distinct pairs
/// cannot fit in 35 hospitals. Yearly records over 2020-2023 average to
/// volumes in [4, 2774.75].
struct CountyFixture {
  std::vector<ZoneAttributes> zones;
  std::vector<HospitalAttributes> hospitals;
  std::vector<RawVisitRecord> records;
  std::vector<DriveTimeRecord> drive_times;
};
inline constexpr const char* kOutlierOrigin = "482019801001";
inline constexpr std::size_t kFixtureZones = 2830;
inline constexpr std::size_t kFixtureHospitals = 35;
inline constexpr std::size_t kFixtureOutOfArea = 18;
inline constexpr std::size_t kFixtureFlows = 16783;
inline constexpr std::size_t kFixtureOutlierFlows = 53;

CountyFixture county_fixture(std::uint64_t seed);
void write_fixture(const CountyFixture& fixture, const std::filesystem::path& dir);

}  // namespace odflow
