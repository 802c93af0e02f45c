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

#include "odflow/features.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "odflow/error.hpp"

namespace odflow {

std::size_t feature_index(std::string_view name) {
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    if (kFeatureNames[j] == name) return j;
  }
  raise(ErrorCode::kConfig, fmt::format("unknown feature '{}'", name));
}

ShareMap normalize_per_origin(std::span<const FlowRecord> flows) {
  std::map<std::string, double> totals;
  for (const auto& f : flows) totals[f.origin_zone_id] += f.visits;
  for (const auto& [origin, total] : totals) {
    if (!(total > 0.0)) {
      raise(ErrorCode::kDegenerateOrigin,
            fmt::format("origin '{}' has zero total outgoing visits", origin));
    }
  }
  ShareMap shares;
  for (const auto& f : flows) {
    shares[{f.origin_zone_id, f.hospital_id}] = f.visits / totals[f.origin_zone_id];
  }
  return shares;
}

FeatureVector pair_features(const ZoneAttributes& z, const HospitalAttributes& h,
                            double drive_time_min) {
  return {h.staffed_all_beds,  h.staffed_icu_beds,
          h.licensed_all_beds, h.all_bed_occupancy,
          h.icu_occupancy,     h.n_reviews,
          h.rating,            h.lon,
          h.lat,               z.total_population,
          z.pct_under18,       z.pct_over65,
          z.pct_hispanic,      z.pct_white,
          z.pct_black,         z.pct_asian,
          z.pct_bachelor_plus, z.median_income,
          z.pct_households_vehicle, z.lon,
          z.lat,               drive_time_min};
}

namespace {

const ZoneAttributes& zone_or_throw(const ODDataset& ds, const std::string& id) {
  const auto* z = ds.find_zone(id);
  if (!z) raise(ErrorCode::kIntegrity, fmt::format("unknown zone '{}'", id));
  return *z;
}

const HospitalAttributes& hospital_or_throw(const ODDataset& ds, const std::string& id) {
  const auto* h = ds.find_hospital(id);
  if (!h) raise(ErrorCode::kIntegrity, fmt::format("unknown hospital '{}'", id));
  return *h;
}

}  // namespace

std::vector<FeatureRow> assemble_features(const ODDataset& dataset) {
  const ShareMap shares = normalize_per_origin(dataset.flows());
  std::vector<FeatureRow> rows;
  rows.reserve(dataset.flows().size());
  for (const auto& f : dataset.flows()) {
    const auto& z = zone_or_throw(dataset, f.origin_zone_id);
    const auto& h = hospital_or_throw(dataset, f.hospital_id);
    const double t = dataset.require_drive_time(f.origin_zone_id, f.hospital_id);
    FeatureRow row;
    row.origin_zone_id = f.origin_zone_id;
    row.hospital_id = f.hospital_id;
    row.features = pair_features(z, h, t);
    row.target_share = shares.at({f.origin_zone_id, f.hospital_id});
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<FeatureRow> assemble_candidates(const ODDataset& dataset) {
  return assemble_candidates(dataset, normalize_per_origin(dataset.flows()), {});
}

std::vector<FeatureRow> assemble_candidates(const ODDataset& dataset,
                                            const ShareMap& shares,
                                            const std::vector<PairKey>& excluded) {
  const std::set<PairKey> skip(excluded.begin(), excluded.end());
  std::vector<FeatureRow> rows;
  for (const auto& origin : dataset.flow_origins()) {
    const auto& z = zone_or_throw(dataset, origin);
    for (const auto& h : dataset.hospitals()) {
      PairKey key{origin, h.hospital_id};
      if (skip.contains(key)) continue;
      FeatureRow row;
      row.origin_zone_id = origin;
      row.hospital_id = h.hospital_id;
      row.features = pair_features(z, h, dataset.require_drive_time(origin, h.hospital_id));
      auto it = shares.find(key);
      row.target_share = it == shares.end() ? 0.0 : it->second;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

FeatureStats fit_feature_stats(std::span<const FeatureRow> rows) {
  if (rows.empty()) {
    raise(ErrorCode::kInsufficientData, "cannot fit feature statistics on zero rows");
  }
  FeatureStats s;
  s.mean.assign(kNumFeatures, 0.0);
  s.std.assign(kNumFeatures, 0.0);
  s.min.assign(kNumFeatures, 0.0);
  s.max.assign(kNumFeatures, 0.0);
  const double n = static_cast<double>(rows.size());
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    double sum = 0.0;
    double lo = rows[0].features[j];
    double hi = lo;
    for (const auto& r : rows) {
      sum += r.features[j];
      lo = std::min(lo, r.features[j]);
      hi = std::max(hi, r.features[j]);
    }
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& r : rows) {
      const double d = r.features[j] - mean;
      ss += d * d;
    }
    s.mean[j] = mean;
    // A column whose values are all equal is constant even if the mean
    // picked up rounding error.
    s.std[j] = (rows.size() < 2 || lo == hi) ? 0.0 : std::sqrt(ss / (n - 1.0));
    s.min[j] = lo;
    s.max[j] = hi;
  }
  return s;
}

std::vector<double> standardize(std::span<const double> features,
                                const FeatureStats& stats) {
  if (features.size() != stats.size()) {
    raise(ErrorCode::kShape, fmt::format("feature width {} does not match stats width {}",
                                         features.size(), stats.size()));
  }
  std::vector<double> z(features.size());
  for (std::size_t j = 0; j < features.size(); ++j) {
    z[j] = stats.is_constant(j) ? 0.0 : (features[j] - stats.mean[j]) / stats.std[j];
  }
  return z;
}

std::vector<FeatureRow> standardize(std::span<const FeatureRow> rows,
                                    const FeatureStats& stats) {
  if (stats.size() != kNumFeatures) {
    raise(ErrorCode::kShape, fmt::format("stats width {} does not match feature width {}",
                                         stats.size(), kNumFeatures));
  }
  std::vector<FeatureRow> out(rows.begin(), rows.end());
  for (auto& r : out) {
    const auto z = standardize(r.features, stats);
    std::copy(z.begin(), z.end(), r.features.begin());
  }
  return out;
}

std::vector<double> destandardize(std::span<const double> z, const FeatureStats& stats) {
  if (z.size() != stats.size()) {
    raise(ErrorCode::kShape, fmt::format("feature width {} does not match stats width {}",
                                         z.size(), stats.size()));
  }
  std::vector<double> x(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) {
    x[j] = stats.is_constant(j) ? stats.mean[j] : z[j] * stats.std[j] + stats.mean[j];
  }
  return x;
}

std::vector<OriginGroup> group_by_origin(std::span<const FeatureRow> rows) {
  std::vector<OriginGroup> groups;
  std::map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto [it, fresh] = slot.emplace(rows[i].origin_zone_id, groups.size());
    if (fresh) groups.push_back({rows[i].origin_zone_id, {}});
    groups[it->second].rows.push_back(i);
  }
  return groups;
}

}  // namespace odflow
