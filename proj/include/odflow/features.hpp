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

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "odflow/dataset.hpp"

namespace odflow {

inline constexpr std::size_t kNumHospitalFeatures = 9;
inline constexpr std::size_t kNumZoneFeatures = 12;
inline constexpr std::size_t kNumFeatures = 22;
inline constexpr std::size_t kHospitalBlockBegin = 0;
inline constexpr std::size_t kZoneBlockBegin = 9;
inline constexpr std::size_t kDriveTimeIndex = 21;

/// Published feature order: hospital block, zone block, then drive time.
/// Attribution and partial-dependence indices refer to this table.
inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "staffed_all_beds",
    "staffed_icu_beds",
    "licensed_all_beds",
    "all_bed_occupancy",
    "icu_occupancy",
    "n_reviews",
    "rating",
    "hospital_lon",
    "hospital_lat",
    "total_population",
    "pct_under18",
    "pct_over65",
    "pct_hispanic",
    "pct_white",
    "pct_black",
    "pct_asian",
    "pct_bachelor_plus",
    "median_income",
    "pct_households_vehicle",
    "zone_lon",
    "zone_lat",
    "drive_time_min",
};

/// Index of a named feature; throws a config error for unknown names.
std::size_t feature_index(std::string_view name);

inline bool is_hospital_feature(std::size_t index) {
  return index < kZoneBlockBegin;
}

using FeatureVector = std::array<double, kNumFeatures>;

struct FeatureRow {
  std::string origin_zone_id;
  std::string hospital_id;
  FeatureVector features{};
  double target_share = 0.0;
};

/// Per-feature moments (and observed extremes) of the fitting rows.
struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<double> min;
  std::vector<double> max;

  bool is_constant(std::size_t j) const { return std[j] == 0.0; }
  std::size_t size() const { return mean.size(); }
};

using ShareMap = std::map<PairKey, double>;

/// Visits of each flow divided by its origin's total outgoing visits.
/// Throws kDegenerateOrigin when an origin's total is zero.
ShareMap normalize_per_origin(std::span<const FlowRecord> flows);

FeatureVector pair_features(const ZoneAttributes& zone,
                            const HospitalAttributes& hospital,
                            double drive_time_min);

/// One row per flow, in flow order, with normalised target shares.
std::vector<FeatureRow> assemble_features(const ODDataset& dataset);

/// Full choice sets: for every origin that has flows, one row per hospital
/// in the dataset. Unobserved pairs carry target share 0. Rows are grouped
/// by origin (first-appearance order), hospitals in dataset order.
std::vector<FeatureRow> assemble_candidates(const ODDataset& dataset);

/// Same as above with explicit per-pair targets (pairs absent from `shares`
/// get 0) and an optional set of pairs to leave out of the choice sets.
std::vector<FeatureRow> assemble_candidates(const ODDataset& dataset,
                                            const ShareMap& shares,
                                            const std::vector<PairKey>& excluded);

FeatureStats fit_feature_stats(std::span<const FeatureRow> rows);

/// z-scores with the fitted stats; constant features map to 0.
std::vector<double> standardize(std::span<const double> features,
                                const FeatureStats& stats);
std::vector<FeatureRow> standardize(std::span<const FeatureRow> rows,
                                    const FeatureStats& stats);
std::vector<double> destandardize(std::span<const double> z,
                                  const FeatureStats& stats);

/// Grouping of row indices by origin, in first-appearance order.
struct OriginGroup {
  std::string origin_zone_id;
  std::vector<std::size_t> rows;
};
std::vector<OriginGroup> group_by_origin(std::span<const FeatureRow> rows);

}  // namespace odflow
