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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "odflow/evaluation.hpp"
#include "odflow/ingest.hpp"
#include "odflow/interpret.hpp"
#include "odflow/model.hpp"
#include "odflow/synth.hpp"

namespace odflow {

struct DataConfig {
  /// Directory holding zones.csv, hospitals.csv, flows.csv, drivetime.csv.
  std::string dir;
  PeriodConfig period;
  std::vector<std::string> exclude_origins;
};

struct InterpretConfig {
  /// Null selects the "All beds" grouping.
  nlohmann::json grouping;
  ShapMode shap_mode = ShapMode::kAuto;
  int n_permutations = 2000;
  /// Observed flows explained by `explain`; a seeded subset when fewer
  /// than the dataset holds.
  std::size_t max_rows = 100;
  std::string feature = "drive_time_min";
  std::string attribute = "rating";
  PdpMode pdp_mode = PdpMode::kAtMeans;
  double grid_lo = 0.0;
  double grid_hi = 70.0;
  double grid_step = 0.5;
};

/// Everything a CLI run reads from --config. Keys are fixed; unknown keys
/// are rejected with their path.
struct RunConfig {
  DataConfig data;
  ModelConfig model = DeepGravityConfig{};
  ProtocolConfig protocol;
  InterpretConfig interpret;
  SynthConfig synth;
  std::uint64_t seed = 0;

  /// Routes the single seed into every seeded component.
  void apply_seed(std::uint64_t s);
  FeatureGrouping grouping() const;
  IngestOptions ingest_options() const;
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& c);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace odflow
