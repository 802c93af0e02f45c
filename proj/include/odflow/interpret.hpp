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
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "odflow/features.hpp"
#include "odflow/model.hpp"

namespace odflow {

/// Batch evaluation of independent feature profiles (raw units).
using ValueFn = std::function<std::vector<double>(std::span<const FeatureVector>)>;

/// Wraps predict_profiles() of a frozen artifact.
ValueFn artifact_value_fn(const ModelArtifact& artifact);

struct FeatureGroup {
  std::string name;
  std::vector<std::size_t> features;
};

/// Disjoint groups covering all 22 features.
struct FeatureGrouping {
  std::vector<FeatureGroup> groups;

  /// One group per feature.
  static FeatureGrouping singletons();
  /// Staffed and licensed bed counts merged into "All beds"; every other
  /// feature on its own.
  static FeatureGrouping all_beds();
  /// Named groups (by feature name or index); unlisted features become
  /// singletons in feature order.
  static FeatureGrouping from_json(const nlohmann::json& j);

  void validate() const;
  std::size_t size() const { return groups.size(); }
};

enum class ShapMode { kAuto, kExact, kSampling };

struct ShapOptions {
  ShapMode mode = ShapMode::kAuto;  // exact when there are at most 12 groups
  int n_permutations = 2000;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kMaxExactGroups = 12;

struct ShapResult {
  std::vector<double> phi;  // per group, in grouping order
  double base_value = 0.0;  // f(background)
  double prediction = 0.0;  // f(instance)
  bool exact = false;
  int n_permutations = 0;
  std::uint64_t seed = 0;
};

/// Grouped Shapley values. Out-of-coalition features take their background
/// value; the coalition value is f of the resulting profile.
ShapResult shapley_values(const ValueFn& f, const FeatureVector& instance,
                          const FeatureVector& background, const FeatureGrouping& grouping,
                          const ShapOptions& options = {});

struct ShapSummary {
  struct GroupRank {
    std::string group;
    std::size_t rank = 0;  // 1-based; equal means share a rank
    double mean_abs_phi = 0.0;
  };
  std::vector<std::string> group_names;   // grouping order
  std::vector<GroupRank> ranking;         // sorted by rank
  std::vector<std::vector<double>> phi;   // rows x groups
  std::vector<std::vector<double>> value; // rows x groups, summed raw member values
  std::vector<double> base_values;
  bool exact = false;
};

/// Per-row attributions and the mean-|phi| ranking. Row r uses the seed
/// mix_seed(options.seed, r).
ShapSummary shap_summary(const ValueFn& f, std::span<const FeatureVector> rows,
                         const FeatureVector& background, const FeatureGrouping& grouping,
                         const ShapOptions& options = {});

/// mean |phi| ranking recomputed from a phi matrix.
std::vector<ShapSummary::GroupRank> rank_groups(const std::vector<std::string>& names,
                                                const std::vector<std::vector<double>>& phi);

std::string shap_summary_csv(const ShapSummary& s);
std::string shap_rows_csv(const ShapSummary& s);

enum class PdpMode { kAtMeans, kAveraged };

struct PdpCurve {
  std::string scenario;
  std::size_t feature = kDriveTimeIndex;
  std::vector<double> grid;
  std::vector<double> values;
  std::string background;  // description of the fixed features
};

/// Sweeps one feature over `grid`. At-means: a single profile with every
/// other feature at `means`. Averaged: the mean response over `rows`.
PdpCurve pdp_curve(const ValueFn& f, std::size_t feature, std::span<const double> grid,
                   PdpMode mode, const FeatureVector& means,
                   std::span<const FeatureVector> rows = {});

/// 0 to 70 minutes in half-minute steps.
std::vector<double> default_drive_grid();

/// Linear grid from lo to hi inclusive with the given step.
std::vector<double> make_grid(double lo, double hi, double step);

/// Drive-time sweeps with a hospital attribute pinned at its training
/// minimum, mean and maximum; all other features at their means.
std::vector<PdpCurve> decay_scenarios(const ValueFn& f, const FeatureStats& stats,
                                      std::size_t attribute, std::span<const double> drive_grid);

std::string pdp_csv(std::span<const PdpCurve> curves);
/// Reads scenario,grid_value,prediction (scenario optional). Curves come
/// back in first-appearance order.
std::vector<PdpCurve> read_pdp_csv(const std::string& text);

struct Crossing {
  double t = 0.0;
  int sign = 0;  // sign of (a - b) after the crossing
};

struct InflectionReport {
  std::vector<Crossing> crossings;
  bool degenerate = false;
};

/// Locates sign changes of a - b by linear interpolation between adjacent
/// grid points. Zeros on grid points are reported as they are; a run of
/// zeros between opposite signs is reported at its first point.
InflectionReport find_inflection(const PdpCurve& a, const PdpCurve& b);

nlohmann::json inflection_to_json(const InflectionReport& r);

/// Shortest round-trip text with ".0" on integral values (35 -> "35.0").
std::string format_abscissa(double t);

}  // namespace odflow
