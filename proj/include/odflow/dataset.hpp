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
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace odflow {

/// Socioeconomic attributes of one residential zone (census block group).
/// Percent-labelled source columns are stored as fractions in [0, 1].
struct ZoneAttributes {
  std::string zone_id;
  double total_population = 0.0;
  double pct_under18 = 0.0;
  double pct_over65 = 0.0;
  double pct_hispanic = 0.0;
  double pct_white = 0.0;
  double pct_black = 0.0;
  double pct_asian = 0.0;
  double pct_bachelor_plus = 0.0;
  double median_income = 0.0;
  double pct_households_vehicle = 0.0;
  double lon = 0.0;
  double lat = 0.0;
};

struct HospitalAttributes {
  std::string hospital_id;
  double staffed_all_beds = 0.0;
  double staffed_icu_beds = 0.0;
  double licensed_all_beds = 0.0;
  double all_bed_occupancy = 0.0;
  double icu_occupancy = 0.0;
  double n_reviews = 0.0;
  double rating = 0.0;
  double lon = 0.0;
  double lat = 0.0;
};

/// Period-averaged visits from one zone to one hospital.
struct FlowRecord {
  std::string origin_zone_id;
  std::string hospital_id;
  double visits = 0.0;
  double drive_time_min = 0.0;
};

using PairKey = std::pair<std::string, std::string>;

/// A consistent spatial-interaction instance. Construct through
/// `ODDataset::build`, which enforces unique identifiers, referential
/// integrity and drive-time coverage of every flow.
class ODDataset {
 public:
  ODDataset() = default;

  static ODDataset build(std::vector<ZoneAttributes> zones,
                         std::vector<HospitalAttributes> hospitals,
                         std::vector<FlowRecord> flows,
                         std::map<PairKey, double> drive_time);

  /// Same as `build` but skips all checks. Used by the validator, which must
  /// be able to hold and report on inconsistent inputs.
  static ODDataset build_unchecked(std::vector<ZoneAttributes> zones,
                                   std::vector<HospitalAttributes> hospitals,
                                   std::vector<FlowRecord> flows,
                                   std::map<PairKey, double> drive_time);

  const std::vector<ZoneAttributes>& zones() const { return zones_; }
  const std::vector<HospitalAttributes>& hospitals() const { return hospitals_; }
  const std::vector<FlowRecord>& flows() const { return flows_; }
  const std::map<PairKey, double>& drive_time() const { return drive_time_; }

  const ZoneAttributes* find_zone(const std::string& id) const;
  const HospitalAttributes* find_hospital(const std::string& id) const;
  std::optional<double> find_drive_time(const std::string& zone_id,
                                        const std::string& hospital_id) const;

  /// Drive time for a pair, throwing a coverage error naming the pair.
  double require_drive_time(const std::string& zone_id,
                            const std::string& hospital_id) const;

  /// Origins that have at least one flow, in first-appearance order.
  std::vector<std::string> flow_origins() const;

  ODDataset with_flows(std::vector<FlowRecord> flows) const;

 private:
  void index();

  std::vector<ZoneAttributes> zones_;
  std::vector<HospitalAttributes> hospitals_;
  std::vector<FlowRecord> flows_;
  std::map<PairKey, double> drive_time_;
  std::map<std::string, std::size_t> zone_index_;
  std::map<std::string, std::size_t> hospital_index_;
};

}  // namespace odflow
