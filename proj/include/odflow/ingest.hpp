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
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "odflow/dataset.hpp"

namespace odflow {

/// Fatal errors block a dataset; warnings (soft-range violations) never do.
struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  std::map<std::string, std::size_t> row_counts;

  bool ok() const { return errors.empty(); }
  void merge(const ValidationReport& other);
};

struct RawVisitRecord {
  std::string origin_zone_id;
  std::string hospital_id;
  std::string period_label;
  double visits = 0.0;
};

struct DriveTimeRecord {
  std::string origin_zone_id;
  std::string hospital_id;
  double drive_time_min = 0.0;
};

template <typename Row>
struct Loaded {
  std::vector<Row> rows;
  ValidationReport report;
};

/// Plausibility bands for soft warnings; values outside only warn.
struct SoftRanges {
  double beds_max = 1403.0;
  double occupancy_max = 0.92;
  double reviews_min = 2.0;
  double reviews_max = 3763.0;
  double rating_min = 1.0;
  double rating_max = 4.8;
  double drive_time_min = 1.65;
  double drive_time_max = 69.95;
};

enum class TableKind { kZones, kHospitals, kFlows, kDriveTime };

const std::vector<std::string>& table_columns(TableKind kind);
std::string table_file_name(TableKind kind);

// Loaders validate the header (missing, duplicate or unknown columns throw a
// schema error) and collect per-row failures, with line numbers, in the
// returned report. Percent columns are read in [0, 100] and stored as
// fractions.
Loaded<ZoneAttributes> load_zones(const std::filesystem::path& path);
Loaded<HospitalAttributes> load_hospitals(const std::filesystem::path& path);
Loaded<RawVisitRecord> load_visits(const std::filesystem::path& path);
Loaded<DriveTimeRecord> load_drive_times(const std::filesystem::path& path);

/// Averaging window: `n_years` calendar (ISO) years starting at `first_year`.
struct PeriodConfig {
  int first_year = 2020;
  int n_years = 4;
};

/// Year bin of a period label. Accepts "YYYY", ISO weeks "YYYY-Www" and
/// dates "YYYY-MM-DD" (binned by the ISO year containing the date).
/// Throws a row error when the label does not parse.
int period_year(const std::string& label);

struct PairVolume {
  std::string origin_zone_id;
  std::string hospital_id;
  double visits = 0.0;
};

/// Window-averaged volume per (origin, hospital), sorted by pair. Missing
/// periods count as zero, so the divisor is always the window length.
std::vector<PairVolume> aggregate_flows(const std::vector<RawVisitRecord>& records,
                                        const PeriodConfig& period);

/// Attaches drive times to aggregated volumes and builds the dataset.
ODDataset assemble_dataset(std::vector<ZoneAttributes> zones,
                           std::vector<HospitalAttributes> hospitals,
                           const std::vector<PairVolume>& volumes,
                           const std::vector<DriveTimeRecord>& drive_times);

struct ExclusionResult {
  ODDataset dataset;
  std::size_t removed_flows = 0;
  std::string notice;
};

/// Drops every flow leaving the listed origins; zones are kept.
ExclusionResult exclude_origins(const ODDataset& dataset,
                                const std::vector<std::string>& origin_ids);

ValidationReport validate_dataset(const ODDataset& dataset,
                                  const SoftRanges& ranges = {});

struct DataPaths {
  std::filesystem::path zones;
  std::filesystem::path hospitals;
  std::filesystem::path flows;
  std::filesystem::path drive_time;

  /// zones.csv, hospitals.csv, flows.csv and drivetime.csv inside `dir`.
  static DataPaths in_directory(const std::filesystem::path& dir);
};

struct IngestOptions {
  PeriodConfig period;
  std::vector<std::string> exclude_origins;
  SoftRanges ranges;
};

struct IngestResult {
  ODDataset dataset;
  ValidationReport report;
  std::size_t flows_before_exclusion = 0;
  std::size_t removed_flows = 0;
};

/// load -> aggregate -> exclude -> validate. Throws kIntegrity carrying the
/// first fatal messages when any table or the assembled dataset is invalid.
IngestResult ingest(const DataPaths& paths, const IngestOptions& options);

/// Canonical text form of a dataset (used for reproducibility checks).
std::string serialize_dataset(const ODDataset& dataset);

/// Writes the dataset as ingest tables. Flows are written with a single
/// period label per pair so that a one-year window reproduces `visits`.
void write_dataset_tables(const ODDataset& dataset, const std::filesystem::path& dir,
                          const std::string& period_label);

std::string zones_csv(const std::vector<ZoneAttributes>& zones);
std::string hospitals_csv(const std::vector<HospitalAttributes>& hospitals);
std::string drive_time_csv(const std::map<PairKey, double>& drive_time);
std::string visits_csv(const std::vector<RawVisitRecord>& records);

}  // namespace odflow
