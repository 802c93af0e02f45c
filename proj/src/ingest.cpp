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

#include "odflow/ingest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <regex>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "odflow/csv.hpp"
#include "odflow/error.hpp"

namespace odflow {

void ValidationReport::merge(const ValidationReport& other) {
  errors.insert(errors.end(), other.errors.begin(), other.errors.end());
  warnings.insert(warnings.end(), other.warnings.begin(), other.warnings.end());
  for (const auto& [k, v] : other.row_counts) row_counts[k] += v;
}

const std::vector<std::string>& table_columns(TableKind kind) {
  static const std::vector<std::string> zones = {
      "zone_id",      "total_population", "pct_under18",       "pct_over65",
      "pct_hispanic", "pct_white",        "pct_black",         "pct_asian",
      "pct_bachelor_plus", "median_income", "pct_households_vehicle", "lon",
      "lat"};
  static const std::vector<std::string> hospitals = {
      "hospital_id",       "staffed_all_beds", "staffed_icu_beds", "licensed_all_beds",
      "all_bed_occupancy", "icu_occupancy",    "n_reviews",        "rating",
      "lon",               "lat"};
  static const std::vector<std::string> flows = {"origin_zone_id", "hospital_id",
                                                 "period_label", "visits"};
  static const std::vector<std::string> drive = {"origin_zone_id", "hospital_id",
                                                 "drive_time_min"};
  switch (kind) {
    case TableKind::kZones: return zones;
    case TableKind::kHospitals: return hospitals;
    case TableKind::kFlows: return flows;
    case TableKind::kDriveTime: return drive;
  }
  return zones;
}

std::string table_file_name(TableKind kind) {
  switch (kind) {
    case TableKind::kZones: return "zones.csv";
    case TableKind::kHospitals: return "hospitals.csv";
    case TableKind::kFlows: return "flows.csv";
    case TableKind::kDriveTime: return "drivetime.csv";
  }
  return {};
}

namespace {

/// Binds a parsed table to its fixed schema and gives typed cell access that
/// records failures in a report instead of throwing.
class RowReader {
 public:
  RowReader(const csv::Table& table, TableKind kind, const std::filesystem::path& path)
      : table_(table), path_(path.string()) {
    const auto& cols = table_columns(kind);
    if (table.header.empty()) {
      raise(ErrorCode::kSchema, fmt::format("{}: missing header row", path_));
    }
    std::map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < table.header.size(); ++i) {
      std::string name = table.header[i];
      if (!seen.emplace(name, i).second) {
        raise(ErrorCode::kSchema, fmt::format("{}: duplicate column '{}'", path_, name));
      }
      if (std::find(cols.begin(), cols.end(), name) == cols.end()) {
        raise(ErrorCode::kSchema, fmt::format("{}: unknown column '{}'", path_, name));
      }
    }
    for (const auto& c : cols) {
      auto it = seen.find(c);
      if (it == seen.end()) {
        raise(ErrorCode::kSchema, fmt::format("{}: missing column '{}'", path_, c));
      }
      index_[c] = it->second;
    }
  }

  std::size_t size() const { return table_.rows.size(); }

  /// Starts row `r`; returns false (and records an error) on a ragged row.
  bool begin(std::size_t r, ValidationReport& report) {
    row_ = r;
    ok_ = true;
    report_ = &report;
    if (table_.rows[r].size() != table_.header.size()) {
      fail(fmt::format("expected {} cells, found {}", table_.header.size(),
                       table_.rows[r].size()));
    }
    return ok_;
  }

  std::string text(const std::string& col) {
    std::string v = table_.rows[row_][index_.at(col)];
    if (v.empty()) fail(fmt::format("column '{}' is empty", col));
    return v;
  }

  double number(const std::string& col) {
    const auto& cell = table_.rows[row_][index_.at(col)];
    auto v = csv::parse_double(cell);
    if (!v) {
      fail(fmt::format("column '{}': cannot parse '{}'", col, cell));
      return 0.0;
    }
    return *v;
  }

  void check(bool condition, const std::string& message) {
    if (!condition) fail(message);
  }

  bool ok() const { return ok_; }
  std::size_t line() const { return table_.lines[row_]; }

 private:
  void fail(const std::string& message) {
    ok_ = false;
    report_->errors.push_back(fmt::format("{}:{}: {}", path_, line(), message));
  }

  const csv::Table& table_;
  std::string path_;
  std::map<std::string, std::size_t> index_;
  std::size_t row_ = 0;
  bool ok_ = true;
  ValidationReport* report_ = nullptr;
};

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

template <typename Row>
Loaded<Row> load_generic(const std::filesystem::path& path, TableKind kind,
                         const std::function<Row(RowReader&)>& parse_row) {
  if (!std::filesystem::exists(path)) {
    raise(ErrorCode::kIo, fmt::format("input file not found: {}", path.string()));
  }
  const csv::Table table = csv::read(path);
  RowReader reader(table, kind, path);
  Loaded<Row> out;
  for (std::size_t r = 0; r < reader.size(); ++r) {
    if (!reader.begin(r, out.report)) continue;
    Row row = parse_row(reader);
    if (reader.ok()) out.rows.push_back(std::move(row));
  }
  out.report.row_counts[table_file_name(kind)] = out.rows.size();
  return out;
}

}  // namespace

Loaded<ZoneAttributes> load_zones(const std::filesystem::path& path) {
  return load_generic<ZoneAttributes>(path, TableKind::kZones, [](RowReader& r) {
    ZoneAttributes z;
    z.zone_id = r.text("zone_id");
    z.total_population = r.number("total_population");
    r.check(z.total_population >= 0.0, "total_population must be >= 0");
    auto pct = [&](const char* col) {
      const double v = r.number(col) / 100.0;
      r.check(in_unit(v), fmt::format("{} must lie in [0, 100]", col));
      return v;
    };
    z.pct_under18 = pct("pct_under18");
    z.pct_over65 = pct("pct_over65");
    z.pct_hispanic = pct("pct_hispanic");
    z.pct_white = pct("pct_white");
    z.pct_black = pct("pct_black");
    z.pct_asian = pct("pct_asian");
    z.pct_bachelor_plus = pct("pct_bachelor_plus");
    z.median_income = r.number("median_income");
    r.check(z.median_income >= 0.0, "median_income must be >= 0");
    z.pct_households_vehicle = pct("pct_households_vehicle");
    z.lon = r.number("lon");
    z.lat = r.number("lat");
    r.check(z.lon >= -180.0 && z.lon <= 180.0, "lon must lie in [-180, 180]");
    r.check(z.lat >= -90.0 && z.lat <= 90.0, "lat must lie in [-90, 90]");
    return z;
  });
}

Loaded<HospitalAttributes> load_hospitals(const std::filesystem::path& path) {
  return load_generic<HospitalAttributes>(path, TableKind::kHospitals, [](RowReader& r) {
    HospitalAttributes h;
    h.hospital_id = r.text("hospital_id");
    auto count = [&](const char* col) {
      const double v = r.number(col);
      r.check(v >= 0.0 && std::floor(v) == v,
              fmt::format("{} must be a nonnegative integer", col));
      return v;
    };
    h.staffed_all_beds = count("staffed_all_beds");
    h.staffed_icu_beds = count("staffed_icu_beds");
    h.licensed_all_beds = count("licensed_all_beds");
    h.all_bed_occupancy = r.number("all_bed_occupancy");
    r.check(in_unit(h.all_bed_occupancy), "all_bed_occupancy must lie in [0, 1]");
    h.icu_occupancy = r.number("icu_occupancy");
    r.check(in_unit(h.icu_occupancy), "icu_occupancy must lie in [0, 1]");
    h.n_reviews = count("n_reviews");
    h.rating = r.number("rating");
    r.check(h.rating >= 0.0 && h.rating <= 5.0, "rating must lie in [0, 5]");
    h.lon = r.number("lon");
    h.lat = r.number("lat");
    r.check(h.lon >= -180.0 && h.lon <= 180.0, "lon must lie in [-180, 180]");
    r.check(h.lat >= -90.0 && h.lat <= 90.0, "lat must lie in [-90, 90]");
    return h;
  });
}

Loaded<RawVisitRecord> load_visits(const std::filesystem::path& path) {
  return load_generic<RawVisitRecord>(path, TableKind::kFlows, [](RowReader& r) {
    RawVisitRecord v;
    v.origin_zone_id = r.text("origin_zone_id");
    v.hospital_id = r.text("hospital_id");
    v.period_label = r.text("period_label");
    try {
      period_year(v.period_label);
    } catch (const Error& e) {
      r.check(false, e.what());
    }
    v.visits = r.number("visits");
    r.check(v.visits >= 0.0, "visits must be >= 0");
    return v;
  });
}

Loaded<DriveTimeRecord> load_drive_times(const std::filesystem::path& path) {
  return load_generic<DriveTimeRecord>(path, TableKind::kDriveTime, [](RowReader& r) {
    DriveTimeRecord d;
    d.origin_zone_id = r.text("origin_zone_id");
    d.hospital_id = r.text("hospital_id");
    d.drive_time_min = r.number("drive_time_min");
    r.check(d.drive_time_min > 0.0, "drive_time_min must be > 0");
    return d;
  });
}

int period_year(const std::string& label) {
  using namespace std::chrono;
  static const std::regex year_re(R"(^(\d{4})$)");
  static const std::regex week_re(R"(^(\d{4})-W(\d{2})$)");
  static const std::regex date_re(R"(^(\d{4})-(\d{2})-(\d{2})$)");
  std::smatch m;
  if (std::regex_match(label, m, year_re)) return std::stoi(m[1]);
  if (std::regex_match(label, m, week_re)) {
    const int week = std::stoi(m[2]);
    if (week < 1 || week > 53) {
      raise(ErrorCode::kRow, fmt::format("invalid ISO week in period label '{}'", label));
    }
    return std::stoi(m[1]);
  }
  if (std::regex_match(label, m, date_re)) {
    const year_month_day ymd{year{std::stoi(m[1])}, month{static_cast<unsigned>(std::stoi(m[2]))},
                             day{static_cast<unsigned>(std::stoi(m[3]))}};
    if (!ymd.ok()) raise(ErrorCode::kRow, fmt::format("invalid date '{}'", label));
    const sys_days d{ymd};
    // The ISO year is the calendar year of the Thursday in the same week.
    const unsigned iso_weekday = weekday{d}.iso_encoding();  // Mon=1 .. Sun=7
    const sys_days thursday = d + days{4 - static_cast<int>(iso_weekday)};
    return static_cast<int>(year_month_day{thursday}.year());
  }
  raise(ErrorCode::kRow, fmt::format("unparsable period label '{}'", label));
}

std::vector<PairVolume> aggregate_flows(const std::vector<RawVisitRecord>& records,
                                        const PeriodConfig& period) {
  if (period.n_years < 1) raise(ErrorCode::kConfig, "period window must span >= 1 year");
  if (records.empty()) raise(ErrorCode::kEmptyDataset, "no visit records to aggregate");
  const int last_year = period.first_year + period.n_years - 1;
  std::map<PairKey, double> totals;
  for (const auto& r : records) {
    const int y = period_year(r.period_label);
    if (y < period.first_year || y > last_year) {
      raise(ErrorCode::kWindow,
            fmt::format("record ({}, {}, {}) falls outside the window {}-{}", r.origin_zone_id,
                        r.hospital_id, r.period_label, period.first_year, last_year));
    }
    totals[{r.origin_zone_id, r.hospital_id}] += r.visits;
  }
  std::vector<PairVolume> out;
  for (const auto& [key, total] : totals) {
    if (total > 0.0) out.push_back({key.first, key.second, total / period.n_years});
  }
  return out;
}

ODDataset assemble_dataset(std::vector<ZoneAttributes> zones,
                           std::vector<HospitalAttributes> hospitals,
                           const std::vector<PairVolume>& volumes,
                           const std::vector<DriveTimeRecord>& drive_times) {
  std::map<PairKey, double> dt;
  for (const auto& d : drive_times) {
    if (!dt.emplace(PairKey{d.origin_zone_id, d.hospital_id}, d.drive_time_min).second) {
      raise(ErrorCode::kIntegrity, fmt::format("duplicate drive time for ({}, {})",
                                               d.origin_zone_id, d.hospital_id));
    }
  }
  std::vector<FlowRecord> flows;
  flows.reserve(volumes.size());
  for (const auto& v : volumes) {
    auto it = dt.find({v.origin_zone_id, v.hospital_id});
    if (it == dt.end()) {
      raise(ErrorCode::kCoverage,
            fmt::format("no drive time for pair ({}, {})", v.origin_zone_id, v.hospital_id));
    }
    flows.push_back({v.origin_zone_id, v.hospital_id, v.visits, it->second});
  }
  return ODDataset::build(std::move(zones), std::move(hospitals), std::move(flows),
                          std::move(dt));
}

ExclusionResult exclude_origins(const ODDataset& dataset,
                                const std::vector<std::string>& origin_ids) {
  const std::set<std::string> drop(origin_ids.begin(), origin_ids.end());
  std::vector<FlowRecord> kept;
  kept.reserve(dataset.flows().size());
  for (const auto& f : dataset.flows()) {
    if (!drop.contains(f.origin_zone_id)) kept.push_back(f);
  }
  const std::size_t removed = dataset.flows().size() - kept.size();
  if (kept.empty()) {
    raise(ErrorCode::kEmptyDataset, "origin exclusion removed every flow");
  }
  ExclusionResult result{dataset.with_flows(std::move(kept)), removed, {}};
  result.notice = removed == 0
                      ? std::string("no flows removed by origin exclusion")
                      : fmt::format("removed {} flows from {} excluded origin(s): {} -> {}",
                                    removed, drop.size(), dataset.flows().size(),
                                    result.dataset.flows().size());
  return result;
}

ValidationReport validate_dataset(const ODDataset& ds, const SoftRanges& rg) {
  ValidationReport rep;
  rep.row_counts["zones"] = ds.zones().size();
  rep.row_counts["hospitals"] = ds.hospitals().size();
  rep.row_counts["flows"] = ds.flows().size();
  rep.row_counts["drivetime"] = ds.drive_time().size();

  auto warn_outside = [&](const std::string& what, double v, double lo, double hi) {
    if (v < lo || v > hi) {
      rep.warnings.push_back(
          fmt::format("{} = {} outside plausible range [{}, {}]", what, v, lo, hi));
    }
  };

  std::set<std::string> zone_ids;
  for (const auto& z : ds.zones()) {
    if (!zone_ids.insert(z.zone_id).second) {
      rep.errors.push_back(fmt::format("duplicate zone_id '{}'", z.zone_id));
    }
    for (double f : {z.pct_under18, z.pct_over65, z.pct_hispanic, z.pct_white, z.pct_black,
                     z.pct_asian, z.pct_bachelor_plus, z.pct_households_vehicle}) {
      if (!in_unit(f)) {
        rep.errors.push_back(fmt::format("zone '{}' has a fraction outside [0, 1]", z.zone_id));
        break;
      }
    }
    if (z.total_population < 0.0 || z.median_income < 0.0) {
      rep.errors.push_back(fmt::format("zone '{}' has a negative count or income", z.zone_id));
    }
  }

  std::set<std::string> hospital_ids;
  for (const auto& h : ds.hospitals()) {
    const std::string& id = h.hospital_id;
    if (!hospital_ids.insert(id).second) {
      rep.errors.push_back(fmt::format("duplicate hospital_id '{}'", id));
    }
    if (h.staffed_all_beds < 0 || h.staffed_icu_beds < 0 || h.licensed_all_beds < 0 ||
        h.n_reviews < 0) {
      rep.errors.push_back(fmt::format("hospital '{}' has a negative count", id));
    }
    if (!in_unit(h.all_bed_occupancy) || !in_unit(h.icu_occupancy)) {
      rep.errors.push_back(fmt::format("hospital '{}' has an occupancy outside [0, 1]", id));
    }
    if (h.rating < 0.0 || h.rating > 5.0) {
      rep.errors.push_back(fmt::format("hospital '{}' rating {} outside [0, 5]", id, h.rating));
    }
    if (h.staffed_icu_beds > h.staffed_all_beds) {
      rep.warnings.push_back(fmt::format("hospital '{}': staffed_icu_beds {} > staffed_all_beds {}",
                                         id, h.staffed_icu_beds, h.staffed_all_beds));
    }
    if (h.staffed_all_beds > h.licensed_all_beds) {
      rep.warnings.push_back(
          fmt::format("hospital '{}': staffed_all_beds {} > licensed_all_beds {}", id,
                      h.staffed_all_beds, h.licensed_all_beds));
    }
    warn_outside(fmt::format("hospital '{}' staffed_all_beds", id), h.staffed_all_beds, 0.0,
                 rg.beds_max);
    warn_outside(fmt::format("hospital '{}' licensed_all_beds", id), h.licensed_all_beds, 0.0,
                 rg.beds_max);
    warn_outside(fmt::format("hospital '{}' all_bed_occupancy", id), h.all_bed_occupancy, 0.0,
                 rg.occupancy_max);
    warn_outside(fmt::format("hospital '{}' icu_occupancy", id), h.icu_occupancy, 0.0,
                 rg.occupancy_max);
    warn_outside(fmt::format("hospital '{}' n_reviews", id), h.n_reviews, rg.reviews_min,
                 rg.reviews_max);
    warn_outside(fmt::format("hospital '{}' rating", id), h.rating, rg.rating_min,
                 rg.rating_max);
  }

  std::set<PairKey> pairs;
  for (const auto& f : ds.flows()) {
    const std::string pair = fmt::format("({}, {})", f.origin_zone_id, f.hospital_id);
    bool refs_ok = true;
    if (!zone_ids.contains(f.origin_zone_id)) {
      rep.errors.push_back(fmt::format("flow {} references unknown zone_id", pair));
      refs_ok = false;
    }
    if (!hospital_ids.contains(f.hospital_id)) {
      rep.errors.push_back(fmt::format("flow {} references unknown hospital_id", pair));
      refs_ok = false;
    }
    if (!pairs.insert({f.origin_zone_id, f.hospital_id}).second) {
      rep.errors.push_back(fmt::format("duplicate flow {}", pair));
    }
    if (!(f.visits >= 0.0)) rep.errors.push_back(fmt::format("flow {} has negative visits", pair));
    if (!(f.drive_time_min > 0.0)) {
      rep.errors.push_back(fmt::format("flow {} has non-positive drive time", pair));
    }
    if (refs_ok && !ds.find_drive_time(f.origin_zone_id, f.hospital_id)) {
      rep.errors.push_back(fmt::format("no drive time for flow {}", pair));
    }
    warn_outside(fmt::format("flow {} drive_time_min", pair), f.drive_time_min,
                 rg.drive_time_min, rg.drive_time_max);
  }
  for (const auto& [key, t] : ds.drive_time()) {
    if (!(t > 0.0)) {
      rep.errors.push_back(
          fmt::format("drive time ({}, {}) must be > 0", key.first, key.second));
    }
  }
  return rep;
}

DataPaths DataPaths::in_directory(const std::filesystem::path& dir) {
  return {dir / "zones.csv", dir / "hospitals.csv", dir / "flows.csv", dir / "drivetime.csv"};
}

namespace {

[[noreturn]] void fail_with(const ValidationReport& rep) {
  std::string msg = fmt::format("{} fatal validation error(s)", rep.errors.size());
  for (std::size_t i = 0; i < rep.errors.size() && i < 5; ++i) msg += "\n  " + rep.errors[i];
  raise(ErrorCode::kIntegrity, msg);
}

}  // namespace

IngestResult ingest(const DataPaths& paths, const IngestOptions& options) {
  auto zones = load_zones(paths.zones);
  auto hospitals = load_hospitals(paths.hospitals);
  auto visits = load_visits(paths.flows);
  auto drive = load_drive_times(paths.drive_time);
  ValidationReport rep;
  rep.merge(zones.report);
  rep.merge(hospitals.report);
  rep.merge(visits.report);
  rep.merge(drive.report);
  if (!rep.ok()) fail_with(rep);

  const auto volumes = aggregate_flows(visits.rows, options.period);
  std::vector<ZoneAttributes> zrows = std::move(zones.rows);
  std::vector<HospitalAttributes> hrows = std::move(hospitals.rows);
  ODDataset assembled = ODDataset::build_unchecked(zrows, hrows, {}, {});
  {
    // Validate before the checked build so every problem is reported at once.
    std::map<PairKey, double> dt;
    for (const auto& d : drive.rows) dt[{d.origin_zone_id, d.hospital_id}] = d.drive_time_min;
    std::vector<FlowRecord> flows;
    for (const auto& v : volumes) {
      auto it = dt.find({v.origin_zone_id, v.hospital_id});
      flows.push_back({v.origin_zone_id, v.hospital_id, v.visits,
                       it == dt.end() ? 1.0 : it->second});
    }
    assembled = ODDataset::build_unchecked(zrows, hrows, std::move(flows), std::move(dt));
    auto structural = validate_dataset(assembled, options.ranges);
    if (!structural.ok()) {
      rep.merge(structural);
      fail_with(rep);
    }
  }
  IngestResult result;
  result.flows_before_exclusion = volumes.size();
  ODDataset dataset = assemble_dataset(std::move(zrows), std::move(hrows), volumes, drive.rows);
  if (!options.exclude_origins.empty()) {
    auto ex = exclude_origins(dataset, options.exclude_origins);
    result.removed_flows = ex.removed_flows;
    rep.warnings.push_back(ex.notice);
    dataset = std::move(ex.dataset);
  }
  auto final_report = validate_dataset(dataset, options.ranges);
  rep.warnings.insert(rep.warnings.end(), final_report.warnings.begin(),
                      final_report.warnings.end());
  rep.row_counts["flows_aggregated"] = volumes.size();
  for (const auto& [k, v] : final_report.row_counts) rep.row_counts[k] = v;
  result.dataset = std::move(dataset);
  result.report = std::move(rep);
  return result;
}

std::string serialize_dataset(const ODDataset& ds) {
  nlohmann::ordered_json j;
  j["zones"] = zones_csv(ds.zones());
  j["hospitals"] = hospitals_csv(ds.hospitals());
  std::string flows = "origin_zone_id,hospital_id,visits,drive_time_min\n";
  for (const auto& f : ds.flows()) {
    flows += fmt::format("{},{},{},{}\n", csv::escape(f.origin_zone_id),
                         csv::escape(f.hospital_id), csv::format_double(f.visits),
                         csv::format_double(f.drive_time_min));
  }
  j["flows"] = flows;
  j["drivetime"] = drive_time_csv(ds.drive_time());
  return j.dump(1);
}

std::string zones_csv(const std::vector<ZoneAttributes>& zones) {
  std::string out = fmt::format("{}\n", fmt::join(table_columns(TableKind::kZones), ","));
  auto p = [](double f) { return csv::format_double(f * 100.0); };
  for (const auto& z : zones) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", csv::escape(z.zone_id),
                       csv::format_double(z.total_population), p(z.pct_under18),
                       p(z.pct_over65), p(z.pct_hispanic), p(z.pct_white), p(z.pct_black),
                       p(z.pct_asian), p(z.pct_bachelor_plus),
                       csv::format_double(z.median_income), p(z.pct_households_vehicle),
                       csv::format_double(z.lon), csv::format_double(z.lat));
  }
  return out;
}

std::string hospitals_csv(const std::vector<HospitalAttributes>& hospitals) {
  std::string out = fmt::format("{}\n", fmt::join(table_columns(TableKind::kHospitals), ","));
  auto d = [](double v) { return csv::format_double(v); };
  for (const auto& h : hospitals) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", csv::escape(h.hospital_id),
                       d(h.staffed_all_beds), d(h.staffed_icu_beds), d(h.licensed_all_beds),
                       d(h.all_bed_occupancy), d(h.icu_occupancy), d(h.n_reviews), d(h.rating),
                       d(h.lon), d(h.lat));
  }
  return out;
}

std::string drive_time_csv(const std::map<PairKey, double>& drive_time) {
  std::string out = "origin_zone_id,hospital_id,drive_time_min\n";
  for (const auto& [key, t] : drive_time) {
    out += fmt::format("{},{},{}\n", csv::escape(key.first), csv::escape(key.second),
                       csv::format_double(t));
  }
  return out;
}

std::string visits_csv(const std::vector<RawVisitRecord>& records) {
  std::string out = "origin_zone_id,hospital_id,period_label,visits\n";
  for (const auto& r : records) {
    out += fmt::format("{},{},{},{}\n", csv::escape(r.origin_zone_id), csv::escape(r.hospital_id),
                       csv::escape(r.period_label), csv::format_double(r.visits));
  }
  return out;
}

void write_dataset_tables(const ODDataset& ds, const std::filesystem::path& dir,
                          const std::string& period_label) {
  std::vector<RawVisitRecord> records;
  records.reserve(ds.flows().size());
  for (const auto& f : ds.flows()) {
    records.push_back({f.origin_zone_id, f.hospital_id, period_label, f.visits});
  }
  csv::write_file(dir / "zones.csv", zones_csv(ds.zones()));
  csv::write_file(dir / "hospitals.csv", hospitals_csv(ds.hospitals()));
  csv::write_file(dir / "flows.csv", visits_csv(records));
  csv::write_file(dir / "drivetime.csv", drive_time_csv(ds.drive_time()));
}

}  // namespace odflow
