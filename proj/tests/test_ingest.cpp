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

#include <algorithm>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "odflow/error.hpp"
#include "odflow/features.hpp"
#include "odflow/ingest.hpp"
#include "odflow/synth.hpp"
#include "test_util.hpp"

namespace odflow {
namespace {

using test::TempDir;
namespace fs = std::filesystem;

void put(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

const char* kZones =
    "zone_id,total_population,pct_under18,pct_over65,pct_hispanic,pct_white,pct_black,"
    "pct_asian,pct_bachelor_plus,median_income,pct_households_vehicle,lon,lat\n"
    "z1,1200,22,11,40,35,15,5,30,54000,93,-95.4,29.7\n"
    "z2,800,18,15,20,60,10,6,45,71000,97,-95.5,29.8\n";

std::string hospitals(double rating = 4.1, double icu = 40, double beds = 300) {
  return fmt::format(
      "hospital_id,staffed_all_beds,staffed_icu_beds,licensed_all_beds,all_bed_occupancy,"
      "icu_occupancy,n_reviews,rating,lon,lat\n"
      "h1,{},{},{},0.7,0.6,350,{},-95.40,29.71\n"
      "h2,450,60,500,0.8,0.7,900,3.9,-95.45,29.75\n",
      beds, icu, std::max(beds, 350.0), rating);
}

const char* kDrive =
    "origin_zone_id,hospital_id,drive_time_min\n"
    "z1,h1,12.5\nz1,h2,27.37\nz2,h1,20\nz2,h2,8\n";

const char* kFlows =
    "origin_zone_id,hospital_id,period_label,visits\n"
    "z1,h1,2020,40\nz1,h2,2021,8\nz2,h1,2022,12\nz2,h2,2023,30\n";

void write_tables(const TempDir& d, const std::string& hosp, const std::string& flows = kFlows) {
  put(d / "zones.csv", kZones);
  put(d / "hospitals.csv", hosp);
  put(d / "drivetime.csv", kDrive);
  put(d / "flows.csv", flows);
}

TEST(Ingest, AcceptsPlausibleTables) {
  TempDir d("ingest_ok");
  write_tables(d, hospitals(4.8));
  const auto r = ingest(DataPaths::in_directory(d.path()), {});
  EXPECT_TRUE(r.report.ok());
  EXPECT_EQ(r.dataset.flows().size(), 4u);
  // Percent columns land as fractions.
  EXPECT_DOUBLE_EQ(r.dataset.find_zone("z1")->pct_under18, 0.22);
  // 27.37 minutes sits inside the plausibility band: no warning names it.
  for (const auto& w : r.report.warnings) EXPECT_EQ(w.find("27.37"), std::string::npos) << w;
}

TEST(Ingest, RatingAboveScaleIsFatal) {
  TempDir d("ingest_rating");
  write_tables(d, hospitals(5.7));
  const auto loaded = load_hospitals(d / "hospitals.csv");
  EXPECT_FALSE(loaded.report.ok());
  try {
    ingest(DataPaths::in_directory(d.path()), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIntegrity);
    EXPECT_NE(std::string(e.what()).find("rating"), std::string::npos);
  }
}

TEST(Ingest, MissingColumnNamesIt) {
  TempDir d("ingest_schema");
  write_tables(d, hospitals(), "origin_zone_id,hospital_id,period_label\nz1,h1,2020\n");
  try {
    load_visits(d / "flows.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchema);
    EXPECT_NE(std::string(e.what()).find("visits"), std::string::npos);
  }
}

TEST(Ingest, MissingFileNamesPath) {
  TempDir d("ingest_missing");
  try {
    ingest(DataPaths::in_directory(d.path()), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
    EXPECT_NE(std::string(e.what()).find("zones.csv"), std::string::npos);
  }
}

TEST(Ingest, UnknownHospitalIsFatal) {
  TempDir d("ingest_ref");
  write_tables(d, hospitals(),
               "origin_zone_id,hospital_id,period_label,visits\nz1,h1,2020,4\nz1,h9,2020,4\n");
  try {
    ingest(DataPaths::in_directory(d.path()), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIntegrity);
    EXPECT_NE(std::string(e.what()).find("h9"), std::string::npos);
  }
}

TEST(Ingest, IcuAboveAllBedsOnlyWarns) {
  TempDir d("ingest_icu");
  write_tables(d, hospitals(4.0, 200, 150));
  const auto r = ingest(DataPaths::in_directory(d.path()), {});
  EXPECT_TRUE(r.report.ok());
  const bool warned = std::any_of(r.report.warnings.begin(), r.report.warnings.end(),
                                  [](const std::string& w) { return w.find("staffed_icu_beds") != std::string::npos; });
  EXPECT_TRUE(warned);
}

TEST(Aggregate, YearlyTotalsAverage) {
  std::vector<RawVisitRecord> rec{{"z", "h", "2020", 8}, {"z", "h", "2021", 12},
                                  {"z", "h", "2022", 16}, {"z", "h", "2023", 12}};
  const auto v = aggregate_flows(rec, {2020, 4});
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].visits, 12.0);
}

TEST(Aggregate, WeeklyRecordsZeroFill) {
  std::vector<RawVisitRecord> rec;
  for (int w = 1; w <= 52; ++w) rec.push_back({"z", "h", fmt::format("2021-W{:02}", w), 1});
  const auto v = aggregate_flows(rec, {2020, 4});
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].visits, 13.0);
}

TEST(Aggregate, PeriodLabels) {
  EXPECT_EQ(period_year("2021"), 2021);
  EXPECT_EQ(period_year("2021-W05"), 2021);
  EXPECT_EQ(period_year("2021-01-01"), 2020);  // ISO week 53 of 2020
  EXPECT_EQ(period_year("2022-06-15"), 2022);
  EXPECT_THROW(period_year("spring"), Error);
}

class CountyFixtureTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("county");
    write_fixture(county_fixture(7), dir_->path());
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static TempDir* dir_;
};
TempDir* CountyFixtureTest::dir_ = nullptr;

TEST_F(CountyFixtureTest, ExclusionCount) {
  IngestOptions o;
  const auto all = ingest(DataPaths::in_directory(dir_->path()), o);
  EXPECT_EQ(all.dataset.zones().size(), kFixtureZones);
  EXPECT_EQ(all.dataset.flows().size(), 16783u);
  o.exclude_origins = {kOutlierOrigin};
  const auto r = ingest(DataPaths::in_directory(dir_->path()), o);
  EXPECT_EQ(r.flows_before_exclusion, 16783u);
  EXPECT_EQ(r.removed_flows, 53u);
  EXPECT_EQ(r.dataset.flows().size(), 16730u);
  EXPECT_EQ(assemble_features(r.dataset).size(), 16730u);
}

TEST_F(CountyFixtureTest, VolumesInPublishedRange) {
  const auto r = ingest(DataPaths::in_directory(dir_->path()), {});
  double lo = 1e300, hi = -1e300;
  for (const auto& f : r.dataset.flows()) {
    lo = std::min(lo, f.visits);
    hi = std::max(hi, f.visits);
  }
  EXPECT_GE(lo, 4.0);
  EXPECT_LE(hi, 2774.75);
}

TEST(Exclusion, AbsentOriginIsNoOp) {
  const auto ds = test::random_dataset(5, 3, 1);
  const auto ex = exclude_origins(ds, {"nowhere"});
  EXPECT_EQ(ex.removed_flows, 0u);
  EXPECT_EQ(ex.dataset.flows().size(), ds.flows().size());
  EXPECT_NE(ex.notice.find("no flows removed"), std::string::npos);
}

TEST(Exclusion, EverythingIsAnError) {
  const auto ds = test::random_dataset(2, 3, 1);
  try {
    exclude_origins(ds, {"z000", "z001"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyDataset);
  }
}

TEST(Serialization, TablesRoundTrip) {
  TempDir d("roundtrip");
  const auto ds = test::random_dataset(6, 4, 3, 0.7);
  write_dataset_tables(ds, d.path(), "2020");
  IngestOptions o;
  o.period = {2020, 1};
  const auto back = ingest(DataPaths::in_directory(d.path()), o);
  EXPECT_EQ(serialize_dataset(back.dataset), serialize_dataset(ds));
}

}  // namespace
}  // namespace odflow
