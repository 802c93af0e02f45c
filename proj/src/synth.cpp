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

// Gravity-world generator and the county-scale ingest fixture.

#include "odflow/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "odflow/csv.hpp"
#include "odflow/error.hpp"
#include "odflow/features.hpp"
#include "odflow/nn.hpp"
#include "odflow/random.hpp"

namespace odflow {

namespace {

constexpr double kLon0 = -95.80;
constexpr double kLat0 = 29.50;
constexpr double kKmPerDegLat = 110.57;
constexpr double kKmPerDegLon = 96.49;  // at about 29.7 degrees north

double round_to(double v, double step) { return std::round(v / step) * step; }

enum Stream : std::uint64_t {
  kZonesStream = 1,
  kHospitalsStream,
  kJitterStream,
  kOutflowStream,
  kNoiseStream,
  kFixtureFlowsStream,
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

ZoneAttributes draw_zone(nn::Rng& rng, const SynthConfig& c, const std::string& id, Point p) {
  ZoneAttributes z;
  z.zone_id = id;
  z.total_population = std::round(uniform(rng, c.population_min, c.population_max));
  z.pct_under18 = round_to(uniform(rng, 0.10, 0.35), 1e-4);
  z.pct_over65 = round_to(uniform(rng, 0.05, 0.25), 1e-4);
  z.pct_hispanic = round_to(uniform(rng, 0.0, 0.8), 1e-4);
  z.pct_white = round_to(uniform(rng, 0.1, 0.9), 1e-4);
  z.pct_black = round_to(uniform(rng, 0.0, 0.6), 1e-4);
  z.pct_asian = round_to(uniform(rng, 0.0, 0.3), 1e-4);
  z.pct_bachelor_plus = round_to(uniform(rng, 0.05, 0.7), 1e-4);
  z.median_income = std::round(uniform(rng, c.income_min, c.income_max));
  z.pct_households_vehicle = round_to(uniform(rng, 0.7, 1.0), 1e-4);
  z.lon = round_to(kLon0 + p.x / kKmPerDegLon, 1e-6);
  z.lat = round_to(kLat0 + p.y / kKmPerDegLat, 1e-6);
  return z;
}

HospitalAttributes draw_hospital(nn::Rng& rng, const SynthConfig& c, const std::string& id) {
  HospitalAttributes h;
  h.hospital_id = id;
  h.staffed_all_beds = std::round(uniform(rng, c.beds_min, c.beds_max));
  h.staffed_icu_beds = std::round(h.staffed_all_beds * uniform(rng, 0.05, 0.2));
  h.licensed_all_beds = std::round(h.staffed_all_beds * uniform(rng, 1.0, 1.3));
  h.all_bed_occupancy = round_to(uniform(rng, c.occupancy_min, c.occupancy_max), 1e-4);
  h.icu_occupancy = round_to(uniform(rng, c.occupancy_min, c.occupancy_max), 1e-4);
  h.n_reviews = std::round(uniform(rng, c.reviews_min, c.reviews_max));
  h.rating = round_to(uniform(rng, c.rating_min, c.rating_max), 0.1);
  return h;
}

void place_hospital(HospitalAttributes& h, Point p) {
  h.lon = round_to(kLon0 + p.x / kKmPerDegLon, 1e-6);
  h.lat = round_to(kLat0 + p.y / kKmPerDegLat, 1e-6);
}

std::string padded_id(char prefix, std::size_t i, std::size_t n) {
  const auto width = std::to_string(std::max<std::size_t>(n, 1) - 1).size();
  return fmt::format("{}{:0{}}", prefix, i, width);
}

/// Counts of `draws` categorical samples over `p`.
std::vector<std::size_t> multinomial(nn::Rng& rng, const std::vector<double>& p, std::size_t draws) {
  std::vector<double> cdf(p.size());
  std::partial_sum(p.begin(), p.end(), cdf.begin());
  std::vector<std::size_t> counts(p.size(), 0);
  for (std::size_t d = 0; d < draws; ++d) {
    const double u = uniform01(rng) * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), p.size() - 1);
    ++counts[k];
  }
  return counts;
}

}  // namespace

// ---- config ----------------------------------------------------------------

void SynthConfig::validate() const {
  if (n_zones < 1 || n_hospitals < 1) raise(ErrorCode::kConfig, "synth: zone and hospital counts must be >= 1");
  if (!(beta_per_min >= 0.0)) raise(ErrorCode::kConfig, "synth: beta must be >= 0");
  if (!(tau_min >= 0.0)) raise(ErrorCode::kConfig, "synth: tau must be >= 0");
  if (!(speed_km_per_min > 0.0)) raise(ErrorCode::kConfig, "synth: speed must be > 0");
  if (!(jitter_min >= 0.0) || !(min_drive_min > 0.0)) {
    raise(ErrorCode::kConfig, "synth: jitter must be >= 0 and the drive-time floor > 0");
  }
  if (!(side_km >= 0.0)) raise(ErrorCode::kConfig, "synth: side must be >= 0");
  auto range = [](double lo, double hi, const char* what) {
    if (!(lo <= hi)) raise(ErrorCode::kConfig, fmt::format("synth: {} range is empty", what));
  };
  range(beds_min, beds_max, "beds");
  range(occupancy_min, occupancy_max, "occupancy");
  range(reviews_min, reviews_max, "reviews");
  range(rating_min, rating_max, "rating");
  range(population_min, population_max, "population");
  range(income_min, income_max, "income");
  range(outflow_min, outflow_max, "outflow");
  if (beds_min < 0 || occupancy_min < 0 || occupancy_max > 1 || reviews_min < 0 ||
      rating_min < 0 || rating_max > 5 || population_min < 0 || income_min < 0 || outflow_min <= 0) {
    raise(ErrorCode::kConfig, "synth: attribute range outside its domain");
  }
  if (noise == NoiseMode::kMultinomial && sample_count < 1) {
    raise(ErrorCode::kConfig, "synth: sample_count must be >= 1");
  }
  if (period.n_years < 1) raise(ErrorCode::kConfig, "synth: period must span at least one year");
}

nlohmann::json synth_config_to_json(const SynthConfig& c) {
  return {{"n_zones", c.n_zones},
          {"n_hospitals", c.n_hospitals},
          {"side_km", c.side_km},
          {"speed_km_per_min", c.speed_km_per_min},
          {"jitter_min", c.jitter_min},
          {"min_drive_min", c.min_drive_min},
          {"beds", {c.beds_min, c.beds_max}},
          {"occupancy", {c.occupancy_min, c.occupancy_max}},
          {"reviews", {c.reviews_min, c.reviews_max}},
          {"rating", {c.rating_min, c.rating_max}},
          {"population", {c.population_min, c.population_max}},
          {"income", {c.income_min, c.income_max}},
          {"identical_hospitals", c.identical_hospitals},
          {"theta_size", c.theta_size},
          {"theta_rating", c.theta_rating},
          {"theta_near", c.theta_near},
          {"theta_occupancy", c.theta_occupancy},
          {"tau_min", c.tau_min},
          {"beta_per_min", c.beta_per_min},
          {"outflow", {c.outflow_min, c.outflow_max}},
          {"noise", c.noise == NoiseMode::kNone ? "none" : "multinomial"},
          {"sample_count", c.sample_count},
          {"first_year", c.period.first_year},
          {"n_years", c.period.n_years},
          {"seed", c.seed}};
}

SynthConfig synth_config_from_json(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) raise(ErrorCode::kConfig, fmt::format("{}: expected an object", path));
  SynthConfig c;
  auto pair = [&](const nlohmann::json& v, double& lo, double& hi) {
    const auto a = v.get<std::vector<double>>();
    if (a.size() != 2) throw nlohmann::json::type_error::create(302, "expected [lo, hi]", &v);
    lo = a[0];
    hi = a[1];
  };
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const auto& v = it.value();
    try {
      if (k == "n_zones") c.n_zones = v.get<std::size_t>();
      else if (k == "n_hospitals") c.n_hospitals = v.get<std::size_t>();
      else if (k == "side_km") c.side_km = v.get<double>();
      else if (k == "speed_km_per_min") c.speed_km_per_min = v.get<double>();
      else if (k == "jitter_min") c.jitter_min = v.get<double>();
      else if (k == "min_drive_min") c.min_drive_min = v.get<double>();
      else if (k == "beds") pair(v, c.beds_min, c.beds_max);
      else if (k == "occupancy") pair(v, c.occupancy_min, c.occupancy_max);
      else if (k == "reviews") pair(v, c.reviews_min, c.reviews_max);
      else if (k == "rating") pair(v, c.rating_min, c.rating_max);
      else if (k == "population") pair(v, c.population_min, c.population_max);
      else if (k == "income") pair(v, c.income_min, c.income_max);
      else if (k == "identical_hospitals") c.identical_hospitals = v.get<bool>();
      else if (k == "theta_size") c.theta_size = v.get<double>();
      else if (k == "theta_rating") c.theta_rating = v.get<double>();
      else if (k == "theta_near") c.theta_near = v.get<double>();
      else if (k == "theta_occupancy") c.theta_occupancy = v.get<double>();
      else if (k == "tau_min") c.tau_min = v.get<double>();
      else if (k == "beta_per_min") c.beta_per_min = v.get<double>();
      else if (k == "outflow") pair(v, c.outflow_min, c.outflow_max);
      else if (k == "noise") {
        const auto s = v.get<std::string>();
        if (s == "none") c.noise = NoiseMode::kNone;
        else if (s == "multinomial") c.noise = NoiseMode::kMultinomial;
        else raise(ErrorCode::kConfig, fmt::format("{}.noise: unknown mode '{}'", path, s));
      } else if (k == "sample_count") c.sample_count = v.get<std::size_t>();
      else if (k == "first_year") c.period.first_year = v.get<int>();
      else if (k == "n_years") c.period.n_years = v.get<int>();
      else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else raise(ErrorCode::kConfig, fmt::format("{}.{}: unknown key", path, k));
    } catch (const nlohmann::json::exception&) {
      raise(ErrorCode::kConfig, fmt::format("{}.{}: wrong value type", path, k));
    }
  }
  return c;
}

// ---- ground truth ----------------------------------------------------------

double UtilityParams::utility(double beds, double rating, double occupancy, double d) const {
  const double rating_term = d > tau_min ? theta_rating * rating : theta_near * rating;
  return theta_size * std::log1p(std::max(beds, 0.0)) + rating_term +
         theta_occupancy * occupancy - beta_per_min * d;
}

double UtilityParams::utility(const FeatureVector& f) const {
  return utility(f[feature_index("staffed_all_beds")], f[feature_index("rating")],
                 f[feature_index("all_bed_occupancy")], f[kDriveTimeIndex]);
}

double GroundTruth::share(const std::string& zone_id, const std::string& hospital_id) const {
  auto z = std::lower_bound(zone_ids.begin(), zone_ids.end(), zone_id);
  auto h = std::find(hospital_ids.begin(), hospital_ids.end(), hospital_id);
  if (z == zone_ids.end() || *z != zone_id || h == hospital_ids.end()) {
    raise(ErrorCode::kPairing,
          fmt::format("pair ({}, {}) is not in the ground truth", zone_id, hospital_id));
  }
  return true_share[static_cast<std::size_t>(z - zone_ids.begin())]
                   [static_cast<std::size_t>(h - hospital_ids.begin())];
}

ValueFn truth_value_fn(const UtilityParams& params, const FeatureVector& reference,
                       double choice_size) {
  const double u_ref = params.utility(reference);
  const double others = std::max(choice_size - 1.0, 0.0);
  return [params, u_ref, others](std::span<const FeatureVector> profiles) {
    std::vector<double> out;
    out.reserve(profiles.size());
    for (const auto& p : profiles) out.push_back(1.0 / (1.0 + others * std::exp(u_ref - params.utility(p))));
    return out;
  };
}

MetricTriple oracle_report(const GroundTruth& truth, const ODDataset& dataset) {
  const ShareMap observed = normalize_per_origin(dataset.flows());
  std::vector<double> y, y_hat;
  for (const auto& [key, share] : observed) {
    y.push_back(share);
    y_hat.push_back(truth.share(key.first, key.second));
  }
  return compute_metrics(y, y_hat);
}

// ---- generation ------------------------------------------------------------

SynthCity generate_city(const SynthConfig& c) {
  c.validate();
  if (c.side_km <= 0.0 && c.n_zones + c.n_hospitals > 1) {
    raise(ErrorCode::kGeneration, "degenerate geometry: every point coincides");
  }
  nn::Rng zr(nn::mix_seed(c.seed, kZonesStream));
  nn::Rng hr(nn::mix_seed(c.seed, kHospitalsStream));
  nn::Rng jr(nn::mix_seed(c.seed, kJitterStream));
  nn::Rng orng(nn::mix_seed(c.seed, kOutflowStream));
  nn::Rng nr(nn::mix_seed(c.seed, kNoiseStream));

  std::vector<ZoneAttributes> zones;
  std::vector<Point> zp;
  for (std::size_t i = 0; i < c.n_zones; ++i) {
    Point p{uniform(zr, 0.0, c.side_km), uniform(zr, 0.0, c.side_km)};
    zp.push_back(p);
    zones.push_back(draw_zone(zr, c, padded_id('z', i, c.n_zones), p));
  }
  std::vector<HospitalAttributes> hospitals;
  std::vector<Point> hp;
  const HospitalAttributes shared = draw_hospital(hr, c, "");
  for (std::size_t i = 0; i < c.n_hospitals; ++i) {
    Point p{uniform(hr, 0.0, c.side_km), uniform(hr, 0.0, c.side_km)};
    hp.push_back(p);
    HospitalAttributes h = c.identical_hospitals ? shared : draw_hospital(hr, c, "");
    h.hospital_id = padded_id('h', i, c.n_hospitals);
    place_hospital(h, p);
    hospitals.push_back(h);
  }
  bool all_same = true;
  for (const auto& p : zp) all_same = all_same && p.x == hp[0].x && p.y == hp[0].y;
  for (const auto& p : hp) all_same = all_same && p.x == hp[0].x && p.y == hp[0].y;
  if (all_same && c.n_zones + c.n_hospitals > 1) {
    raise(ErrorCode::kGeneration, "degenerate geometry: every point coincides");
  }

  SynthCity city;
  GroundTruth& truth = city.truth;
  truth.params = {c.theta_size, c.theta_rating, c.theta_near, c.theta_occupancy, c.tau_min, c.beta_per_min};
  std::vector<DriveTimeRecord> drive;
  for (const auto& z : zones) truth.zone_ids.push_back(z.zone_id);
  for (const auto& h : hospitals) truth.hospital_ids.push_back(h.hospital_id);

  for (std::size_t zi = 0; zi < zones.size(); ++zi) {
    std::vector<double> u(hospitals.size());
    for (std::size_t hi = 0; hi < hospitals.size(); ++hi) {
      const double km = std::hypot(zp[zi].x - hp[hi].x, zp[zi].y - hp[hi].y);
      double t = km / c.speed_km_per_min + uniform(jr, 0.0, c.jitter_min);
      t = std::max(t, c.min_drive_min);
      drive.push_back({zones[zi].zone_id, hospitals[hi].hospital_id, t});
      const auto& h = hospitals[hi];
      u[hi] = truth.params.utility(h.staffed_all_beds, h.rating, h.all_bed_occupancy, t);
    }
    const double mx = *std::max_element(u.begin(), u.end());
    double z = 0.0;
    for (double& v : u) {
      v = std::exp(v - mx);
      z += v;
    }
    for (double& v : u) v /= z;
    truth.true_share.push_back(std::move(u));
  }

  for (std::size_t zi = 0; zi < zones.size(); ++zi) {
    const double outflow = uniform(orng, c.outflow_min, c.outflow_max);
    for (int y = 0; y < c.period.n_years; ++y) {
      const std::string label = std::to_string(c.period.first_year + y);
      if (c.noise == NoiseMode::kNone) {
        for (std::size_t hi = 0; hi < hospitals.size(); ++hi) {
          const double v = outflow * truth.true_share[zi][hi];
          if (v > 0.0) city.records.push_back({zones[zi].zone_id, hospitals[hi].hospital_id, label, v});
        }
      } else {
        const auto counts = multinomial(nr, truth.true_share[zi], c.sample_count);
        for (std::size_t hi = 0; hi < hospitals.size(); ++hi) {
          if (counts[hi] > 0) {
            city.records.push_back({zones[zi].zone_id, hospitals[hi].hospital_id, label,
                                    static_cast<double>(counts[hi])});
          }
        }
      }
    }
  }
  city.dataset = assemble_dataset(zones, hospitals, aggregate_flows(city.records, c.period), drive);
  truth.achievable = oracle_report(truth, city.dataset);
  return city;
}

std::string truth_csv(const GroundTruth& t) {
  std::string out = "origin_zone_id,hospital_id,true_share\n";
  for (std::size_t z = 0; z < t.zone_ids.size(); ++z) {
    for (std::size_t h = 0; h < t.hospital_ids.size(); ++h) {
      out += fmt::format("{},{},{}\n", csv::escape(t.zone_ids[z]), csv::escape(t.hospital_ids[h]),
                         csv::format_double(t.true_share[z][h]));
    }
  }
  return out;
}

void write_city(const SynthCity& city, const SynthConfig& config, const std::filesystem::path& dir) {
  const auto& ds = city.dataset;
  csv::write_file(dir / table_file_name(TableKind::kZones), zones_csv(ds.zones()));
  csv::write_file(dir / table_file_name(TableKind::kHospitals), hospitals_csv(ds.hospitals()));
  csv::write_file(dir / table_file_name(TableKind::kFlows), visits_csv(city.records));
  csv::write_file(dir / table_file_name(TableKind::kDriveTime), drive_time_csv(ds.drive_time()));
  csv::write_file(dir / "truth.csv", truth_csv(city.truth));
  const auto& a = city.truth.achievable;
  const nlohmann::json oracle = {
      {"config", synth_config_to_json(config)},
      {"utility",
       {{"theta_size", city.truth.params.theta_size},
        {"theta_rating", city.truth.params.theta_rating},
        {"theta_near", city.truth.params.theta_near},
        {"theta_occupancy", city.truth.params.theta_occupancy},
        {"tau_min", city.truth.params.tau_min},
        {"beta_per_min", city.truth.params.beta_per_min}}},
      {"achievable", {{"nrmse", a.nrmse}, {"smape", a.smape}, {"cpc", a.cpc}}},
      {"n_zones", ds.zones().size()},
      {"n_hospitals", ds.hospitals().size()},
      {"n_flows", ds.flows().size()}};
  csv::write_file(dir / "oracle.json", oracle.dump(2) + "\n");
}

// ---- county fixture --------------------------------------------------------

CountyFixture county_fixture(std::uint64_t seed) {
  SynthConfig c;
  c.side_km = 45.0;
  nn::Rng zr(nn::mix_seed(seed, kZonesStream));
  nn::Rng hr(nn::mix_seed(seed, kHospitalsStream));
  nn::Rng jr(nn::mix_seed(seed, kJitterStream));
  nn::Rng fr(nn::mix_seed(seed, kFixtureFlowsStream));

  CountyFixture fx;
  std::vector<Point> zp, hp;
  // The outlier origin is the last zone.
  for (std::size_t i = 0; i < kFixtureZones; ++i) {
    Point p{uniform(zr, 0.0, c.side_km), uniform(zr, 0.0, c.side_km)};
    const std::string id = i + 1 == kFixtureZones ? std::string(kOutlierOrigin)
                                                  : fmt::format("48201{:07d}", 100100 + 10 * i);
    zp.push_back(p);
    fx.zones.push_back(draw_zone(zr, c, id, p));
  }
  const std::size_t n_fac = kFixtureHospitals + kFixtureOutOfArea;
  for (std::size_t i = 0; i < n_fac; ++i) {
    const bool out_of_area = i >= kFixtureHospitals;
    Point p = out_of_area ? Point{uniform(hr, c.side_km, 1.5 * c.side_km), uniform(hr, 0.0, c.side_km)}
                          : Point{uniform(hr, 0.0, c.side_km), uniform(hr, 0.0, c.side_km)};
    hp.push_back(p);
    HospitalAttributes h = draw_hospital(
        hr, c, out_of_area ? fmt::format("x{:02d}", i - kFixtureHospitals) : fmt::format("h{:02d}", i));
    place_hospital(h, p);
    fx.hospitals.push_back(h);
  }
  for (std::size_t zi = 0; zi < kFixtureZones; ++zi) {
    for (std::size_t hi = 0; hi < n_fac; ++hi) {
      const double km = std::hypot(zp[zi].x - hp[hi].x, zp[zi].y - hp[hi].y);
      const double t = std::clamp(km + uniform(jr, 0.0, 3.0), 1.65, 69.95);
      fx.drive_times.push_back({fx.zones[zi].zone_id, fx.hospitals[hi].hospital_id, t});
    }
  }

  // Regular zones: 5 or 6 destinations among the study hospitals, nearest
  // first with a random perturbation, summing to 16,730 flows.
  const std::size_t regular = kFixtureZones - 1;
  const std::size_t regular_flows = kFixtureFlows - kFixtureOutlierFlows;
  const std::size_t base = regular_flows / regular;
  const std::size_t extra = regular_flows % regular;
  constexpr int kMinTotal = 16;     // 4.0 per year
  constexpr int kMaxTotal = 11099;  // 2774.75 per year
  auto emit = [&](const std::string& z, const std::string& h, int total) {
    // Split a 4-year total into yearly records with random weights.
    std::array<double, 4> w{};
    for (double& v : w) v = uniform(fr, 0.2, 1.0);
    const double ws = w[0] + w[1] + w[2] + w[3];
    int left = total;
    for (int y = 0; y < 4; ++y) {
      const int v = y == 3 ? left : static_cast<int>(std::floor(total * w[static_cast<std::size_t>(y)] / ws));
      left -= v;
      if (v > 0) fx.records.push_back({z, h, std::to_string(2020 + y), static_cast<double>(v)});
    }
  };
  auto draw_total = [&]() {
    const double u = uniform01(fr);
    return kMinTotal + static_cast<int>(std::floor(std::pow(u, 8.0) * (kMaxTotal - kMinTotal)));
  };
  std::size_t flow_no = 0;
  for (std::size_t zi = 0; zi < regular; ++zi) {
    const std::size_t k = base + (zi < extra ? 1 : 0);
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t hi = 0; hi < kFixtureHospitals; ++hi) {
      order.push_back({fx.drive_times[zi * n_fac + hi].drive_time_min + uniform(fr, 0.0, 15.0), hi});
    }
    std::sort(order.begin(), order.end());
    for (std::size_t j = 0; j < k; ++j) {
      int total = draw_total();
      if (flow_no == 0) total = kMinTotal;
      if (flow_no == 1) total = kMaxTotal;
      emit(fx.zones[zi].zone_id, fx.hospitals[order[j].second].hospital_id, total);
      ++flow_no;
    }
  }
  for (std::size_t hi = 0; hi < n_fac; ++hi) {
    emit(kOutlierOrigin, fx.hospitals[hi].hospital_id, draw_total());
  }
  return fx;
}

void write_fixture(const CountyFixture& fx, const std::filesystem::path& dir) {
  csv::write_file(dir / table_file_name(TableKind::kZones), zones_csv(fx.zones));
  csv::write_file(dir / table_file_name(TableKind::kHospitals), hospitals_csv(fx.hospitals));
  csv::write_file(dir / table_file_name(TableKind::kFlows), visits_csv(fx.records));
  std::map<PairKey, double> dt;
  for (const auto& d : fx.drive_times) dt[{d.origin_zone_id, d.hospital_id}] = d.drive_time_min;
  csv::write_file(dir / table_file_name(TableKind::kDriveTime), drive_time_csv(dt));
}

}  // namespace odflow
