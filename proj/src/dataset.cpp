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

#include "odflow/dataset.hpp"

#include <set>

#include <fmt/format.h>

#include "odflow/error.hpp"

namespace odflow {

ODDataset ODDataset::build_unchecked(std::vector<ZoneAttributes> zones,
                                     std::vector<HospitalAttributes> hospitals,
                                     std::vector<FlowRecord> flows,
                                     std::map<PairKey, double> drive_time) {
  ODDataset ds;
  ds.zones_ = std::move(zones);
  ds.hospitals_ = std::move(hospitals);
  ds.flows_ = std::move(flows);
  ds.drive_time_ = std::move(drive_time);
  ds.index();
  return ds;
}

ODDataset ODDataset::build(std::vector<ZoneAttributes> zones,
                           std::vector<HospitalAttributes> hospitals,
                           std::vector<FlowRecord> flows,
                           std::map<PairKey, double> drive_time) {
  ODDataset ds = build_unchecked(std::move(zones), std::move(hospitals),
                                 std::move(flows), std::move(drive_time));
  if (ds.zone_index_.size() != ds.zones_.size()) {
    raise(ErrorCode::kIntegrity, "duplicate zone_id in zones");
  }
  if (ds.hospital_index_.size() != ds.hospitals_.size()) {
    raise(ErrorCode::kIntegrity, "duplicate hospital_id in hospitals");
  }
  std::set<PairKey> seen;
  for (const auto& f : ds.flows_) {
    if (!ds.zone_index_.contains(f.origin_zone_id)) {
      raise(ErrorCode::kIntegrity,
            fmt::format("flow references unknown zone '{}'", f.origin_zone_id));
    }
    if (!ds.hospital_index_.contains(f.hospital_id)) {
      raise(ErrorCode::kIntegrity,
            fmt::format("flow references unknown hospital '{}'", f.hospital_id));
    }
    if (!seen.insert({f.origin_zone_id, f.hospital_id}).second) {
      raise(ErrorCode::kIntegrity,
            fmt::format("duplicate flow ({}, {})", f.origin_zone_id, f.hospital_id));
    }
    if (!(f.visits >= 0.0)) {
      raise(ErrorCode::kRow, fmt::format("flow ({}, {}) has negative visits",
                                         f.origin_zone_id, f.hospital_id));
    }
    if (!(f.drive_time_min > 0.0)) {
      raise(ErrorCode::kRow, fmt::format("flow ({}, {}) has non-positive drive time",
                                         f.origin_zone_id, f.hospital_id));
    }
    ds.require_drive_time(f.origin_zone_id, f.hospital_id);
  }
  return ds;
}

void ODDataset::index() {
  zone_index_.clear();
  hospital_index_.clear();
  for (std::size_t i = 0; i < zones_.size(); ++i) {
    zone_index_.emplace(zones_[i].zone_id, i);
  }
  for (std::size_t i = 0; i < hospitals_.size(); ++i) {
    hospital_index_.emplace(hospitals_[i].hospital_id, i);
  }
}

const ZoneAttributes* ODDataset::find_zone(const std::string& id) const {
  auto it = zone_index_.find(id);
  return it == zone_index_.end() ? nullptr : &zones_[it->second];
}

const HospitalAttributes* ODDataset::find_hospital(const std::string& id) const {
  auto it = hospital_index_.find(id);
  return it == hospital_index_.end() ? nullptr : &hospitals_[it->second];
}

std::optional<double> ODDataset::find_drive_time(const std::string& zone_id,
                                                 const std::string& hospital_id) const {
  auto it = drive_time_.find({zone_id, hospital_id});
  if (it == drive_time_.end()) return std::nullopt;
  return it->second;
}

double ODDataset::require_drive_time(const std::string& zone_id,
                                     const std::string& hospital_id) const {
  auto t = find_drive_time(zone_id, hospital_id);
  if (!t) {
    raise(ErrorCode::kCoverage,
          fmt::format("no drive time for pair ({}, {})", zone_id, hospital_id));
  }
  return *t;
}

std::vector<std::string> ODDataset::flow_origins() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& f : flows_) {
    if (seen.insert(f.origin_zone_id).second) out.push_back(f.origin_zone_id);
  }
  return out;
}

ODDataset ODDataset::with_flows(std::vector<FlowRecord> flows) const {
  ODDataset ds = *this;
  ds.flows_ = std::move(flows);
  return ds;
}

}  // namespace odflow
