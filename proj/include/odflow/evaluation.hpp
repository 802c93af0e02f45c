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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "odflow/dataset.hpp"
#include "odflow/model.hpp"

namespace odflow {

struct MetricTriple {
  double nrmse = 0.0;
  double smape = 0.0;
  double cpc = 0.0;
};

/// Root mean squared error over the range of `y`.
double nrmse(std::span<const double> y, std::span<const double> y_hat);
/// Symmetric mean absolute percentage error in [0, 200]; 0/0 terms count 0.
double smape(std::span<const double> y, std::span<const double> y_hat);
/// Common part of commuters, 2 sum(min) / sum(y + y_hat).
double cpc(std::span<const double> y, std::span<const double> y_hat);
MetricTriple compute_metrics(std::span<const double> y, std::span<const double> y_hat);

/// Fold index of each of `n` items; fold sizes differ by at most one, the
/// first n % k folds holding the extra item.
std::vector<int> kfold_split(std::size_t n, int k, std::uint64_t seed);

enum class SplitMode { kKFold, kHoldout };
enum class SplitGrouping { kRow, kOrigin };

struct ProtocolConfig {
  SplitMode mode = SplitMode::kKFold;
  int k = 10;
  int runs = 10;
  std::uint64_t base_seed = 0;
  /// Held-out fraction in holdout mode.
  double test_fraction = 0.1;
  SplitGrouping grouping = SplitGrouping::kRow;
  /// Keep each cell's loss curve in the report.
  bool keep_loss_curves = false;
};

nlohmann::json protocol_to_json(const ProtocolConfig& p);
ProtocolConfig protocol_from_json(const nlohmann::json& j, const std::string& path = "protocol");

struct FoldCell {
  int run = 0;
  int fold = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  MetricTriple metrics;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::vector<LossPoint> loss_curve;
};

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 with fewer than 2 cells
};

struct EvalReport {
  nlohmann::json model_config;
  ProtocolConfig protocol;
  std::vector<FoldCell> cells;
  Aggregate nrmse, smape, cpc;
  std::size_t n_failed = 0;
  bool complete() const { return n_failed == 0; }
};

/// Fits on each training complement and scores the held-out observed flows.
/// Predictions are clipped at 0 before scoring. Cells that fail (divergence,
/// degenerate folds) are kept in the report and excluded from aggregates.
EvalReport cross_validate(const ModelConfig& config, const ODDataset& dataset,
                          const ProtocolConfig& protocol);

Aggregate aggregate(std::span<const double> values);
/// Recomputes the three aggregates from the successful cells.
void refresh_aggregates(EvalReport& report);

/// "0.62 ± 0.0036": mean to two decimals, std to four.
std::string format_mean_std(const Aggregate& a);

nlohmann::json report_to_json(const EvalReport& report);
/// run,fold,nrmse,smape,cpc for the successful cells.
std::string report_csv(const EvalReport& report);
/// One "metric: mean ± std" line per metric.
std::string report_summary(const EvalReport& report);

}  // namespace odflow
