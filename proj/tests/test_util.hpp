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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include <fmt/format.h>

#include "odflow/dataset.hpp"
#include "odflow/features.hpp"
#include "odflow/nn.hpp"

namespace odflow::test {

namespace fs = std::filesystem;

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            fmt::format("odflow_{}_{}_{}", tag, static_cast<long>(::getpid()), counter++);
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline double unif(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline ZoneAttributes random_zone(const std::string& id, std::mt19937_64& rng) {
  ZoneAttributes z;
  z.zone_id = id;
  z.total_population = unif(rng, 300, 5000);
  z.pct_under18 = unif(rng, 0.1, 0.3);
  z.pct_over65 = unif(rng, 0.05, 0.25);
  z.pct_hispanic = unif(rng, 0, 0.6);
  z.pct_white = unif(rng, 0.1, 0.8);
  z.pct_black = unif(rng, 0, 0.4);
  z.pct_asian = unif(rng, 0, 0.2);
  z.pct_bachelor_plus = unif(rng, 0.05, 0.7);
  z.median_income = unif(rng, 20000, 200000);
  z.pct_households_vehicle = unif(rng, 0.7, 1.0);
  z.lon = unif(rng, -95.8, -95.0);
  z.lat = unif(rng, 29.5, 30.1);
  return z;
}

inline HospitalAttributes random_hospital(const std::string& id, std::mt19937_64& rng) {
  HospitalAttributes h;
  h.hospital_id = id;
  h.staffed_all_beds = std::round(unif(rng, 20, 900));
  h.staffed_icu_beds = std::round(h.staffed_all_beds * unif(rng, 0.05, 0.2));
  h.licensed_all_beds = h.staffed_all_beds + std::round(unif(rng, 0, 300));
  h.all_bed_occupancy = unif(rng, 0.3, 0.92);
  h.icu_occupancy = unif(rng, 0.3, 0.92);
  h.n_reviews = std::round(unif(rng, 2, 3000));
  h.rating = unif(rng, 1.0, 4.8);
  h.lon = unif(rng, -95.8, -95.0);
  h.lat = unif(rng, 29.5, 30.1);
  return h;
}

/// Random instance with drive times for every pair. Each zone sends flows
/// to a random subset of hospitals (all of them when density is 1).
inline ODDataset random_dataset(std::size_t n_zones, std::size_t n_hospitals, std::uint64_t seed,
                                double density = 1.0) {
  std::mt19937_64 rng(seed);
  std::vector<ZoneAttributes> zones;
  std::vector<HospitalAttributes> hospitals;
  for (std::size_t i = 0; i < n_zones; ++i) zones.push_back(random_zone(fmt::format("z{:03}", i), rng));
  for (std::size_t j = 0; j < n_hospitals; ++j) {
    hospitals.push_back(random_hospital(fmt::format("h{:02}", j), rng));
  }
  std::map<PairKey, double> drive;
  std::vector<FlowRecord> flows;
  for (const auto& z : zones) {
    bool any = false;
    for (std::size_t j = 0; j < n_hospitals; ++j) {
      const auto& h = hospitals[j];
      const double t = unif(rng, 2, 60);
      drive[{z.zone_id, h.hospital_id}] = t;
      const bool last = j + 1 == n_hospitals;
      if (unif(rng, 0, 1) < density || (last && !any)) {
        flows.push_back({z.zone_id, h.hospital_id, std::round(unif(rng, 1, 100)), t});
        any = true;
      }
    }
  }
  return ODDataset::build(std::move(zones), std::move(hospitals), std::move(flows),
                          std::move(drive));
}

inline FeatureVector random_profile(std::mt19937_64& rng) {
  FeatureVector v{};
  for (auto& x : v) x = unif(rng, -1, 1);
  return v;
}

/// Central differences over every parameter entry; returns the largest
/// |analytic - numeric| / max(|analytic|, |numeric|, floor).
struct FdResult {
  double max_rel = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

inline FdResult finite_difference(std::span<const nn::Param> params, const std::vector<std::vector<double>>& analytic,
                                  const std::function<double()>& loss, double h = 1e-5,
                                  double floor = 1e-6) {
  FdResult r;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].size; ++i) {
      double& w = params[p].value[i];
      const double saved = w;
      w = saved + h;
      const double up = loss();
      w = saved - h;
      const double down = loss();
      w = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[p][i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      if (rel > r.max_rel) {
        r.max_rel = rel;
        r.worst = fmt::format("{}[{}] analytic {} numeric {}", params[p].name, i, a, numeric);
      }
      ++r.checked;
    }
  }
  return r;
}

/// Snapshot of the gradient accumulators.
inline std::vector<std::vector<double>> grads_of(std::span<const nn::Param> params) {
  std::vector<std::vector<double>> g;
  for (const auto& p : params) g.emplace_back(p.grad, p.grad + p.size);
  return g;
}

/// Independent per-origin softmax cross-entropy, averaged over origins.
inline double reference_ce(std::span<const double> scores, std::span<const double> target,
                           const std::vector<std::vector<std::size_t>>& groups) {
  double total = 0.0;
  for (const auto& g : groups) {
    long double mx = -INFINITY;
    for (auto i : g) mx = std::max<long double>(mx, scores[i]);
    long double z = 0.0L;
    for (auto i : g) z += std::exp(static_cast<long double>(scores[i]) - mx);
    const long double lse = mx + std::log(z);
    long double ce = 0.0L;
    for (auto i : g) ce -= target[i] * (scores[i] - lse);
    total += static_cast<double>(ce);
  }
  return total / static_cast<double>(groups.size());
}

}  // namespace odflow::test
