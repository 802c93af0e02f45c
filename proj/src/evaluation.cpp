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

#include "odflow/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>

#include "odflow/csv.hpp"
#include "odflow/error.hpp"
#include "odflow/features.hpp"
#include "odflow/nn.hpp"

namespace odflow {

namespace {

void require_same_length(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size()) {
    raise(ErrorCode::kShape, fmt::format("length mismatch: {} vs {}", y.size(), y_hat.size()));
  }
}

}  // namespace

double nrmse(std::span<const double> y, std::span<const double> y_hat) {
  require_same_length(y, y_hat);
  if (y.size() < 2) raise(ErrorCode::kShape, "NRMSE needs at least 2 values");
  double sse = 0.0;
  double lo = y[0];
  double hi = y[0];
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - y_hat[i];
    sse += d * d;
    lo = std::min(lo, y[i]);
    hi = std::max(hi, y[i]);
  }
  if (!(hi > lo)) raise(ErrorCode::kUndefinedRange, "NRMSE is undefined for a constant target");
  return std::sqrt(sse / static_cast<double>(y.size())) / (hi - lo);
}

double smape(std::span<const double> y, std::span<const double> y_hat) {
  require_same_length(y, y_hat);
  if (y.empty()) raise(ErrorCode::kShape, "SMAPE needs at least 1 value");
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double den = (std::abs(y_hat[i]) + std::abs(y[i])) / 2.0;
    if (den > 0.0) sum += std::abs(y[i] - y_hat[i]) / den;
  }
  return sum / static_cast<double>(y.size()) * 100.0;
}

double cpc(std::span<const double> y, std::span<const double> y_hat) {
  require_same_length(y, y_hat);
  double common = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0.0 || y_hat[i] < 0.0) {
      raise(ErrorCode::kDomain, fmt::format("CPC needs nonnegative flows (index {})", i));
    }
    common += std::min(y[i], y_hat[i]);
    total += y[i] + y_hat[i];
  }
  if (!(total > 0.0)) raise(ErrorCode::kUndefinedOverlap, "CPC is undefined when both sums are 0");
  return 2.0 * common / total;
}

MetricTriple compute_metrics(std::span<const double> y, std::span<const double> y_hat) {
  return {nrmse(y, y_hat), smape(y, y_hat), cpc(y, y_hat)};
}

std::vector<int> kfold_split(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2 || static_cast<std::size_t>(k) > n) {
    raise(ErrorCode::kProtocol, fmt::format("k = {} is invalid for {} items", k, n));
  }
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  nn::Rng rng(nn::mix_seed(seed, 0x6b666f6c64ULL));
  nn::shuffle(perm, rng);
  const std::size_t base = n / static_cast<std::size_t>(k);
  const std::size_t extra = n % static_cast<std::size_t>(k);
  std::vector<int> fold(n);
  std::size_t pos = 0;
  for (int f = 0; f < k; ++f) {
    const std::size_t size = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) fold[perm[pos++]] = f;
  }
  return fold;
}

// ---- protocol config -------------------------------------------------------

nlohmann::json protocol_to_json(const ProtocolConfig& p) {
  return {{"mode", p.mode == SplitMode::kKFold ? "kfold" : "holdout"},
          {"k", p.k},
          {"runs", p.runs},
          {"base_seed", p.base_seed},
          {"test_fraction", p.test_fraction},
          {"grouping", p.grouping == SplitGrouping::kRow ? "row" : "origin"},
          {"keep_loss_curves", p.keep_loss_curves}};
}

ProtocolConfig protocol_from_json(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) raise(ErrorCode::kConfig, fmt::format("{}: expected an object", path));
  ProtocolConfig p;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const auto& v = it.value();
    try {
      if (key == "mode") {
        const auto s = v.get<std::string>();
        if (s == "kfold") p.mode = SplitMode::kKFold;
        else if (s == "holdout") p.mode = SplitMode::kHoldout;
        else raise(ErrorCode::kConfig, fmt::format("{}.mode: unknown mode '{}'", path, s));
      } else if (key == "k") {
        p.k = v.get<int>();
      } else if (key == "runs") {
        p.runs = v.get<int>();
      } else if (key == "base_seed") {
        p.base_seed = v.get<std::uint64_t>();
      } else if (key == "test_fraction") {
        p.test_fraction = v.get<double>();
      } else if (key == "grouping") {
        const auto s = v.get<std::string>();
        if (s == "row") p.grouping = SplitGrouping::kRow;
        else if (s == "origin") p.grouping = SplitGrouping::kOrigin;
        else raise(ErrorCode::kConfig, fmt::format("{}.grouping: unknown grouping '{}'", path, s));
      } else if (key == "keep_loss_curves") {
        p.keep_loss_curves = v.get<bool>();
      } else {
        raise(ErrorCode::kConfig, fmt::format("{}.{}: unknown key", path, key));
      }
    } catch (const nlohmann::json::exception&) {
      raise(ErrorCode::kConfig, fmt::format("{}.{}: wrong value type", path, key));
    }
  }
  return p;
}

// ---- cross-validation ------------------------------------------------------

namespace {

/// Fold id per observed flow for one run.
std::vector<int> assign_cells(const ODDataset& ds, const ProtocolConfig& p, std::uint64_t seed) {
  const auto& flows = ds.flows();
  std::vector<std::size_t> unit_of(flows.size());
  std::size_t n_units = flows.size();
  if (p.grouping == SplitGrouping::kOrigin) {
    std::map<std::string, std::size_t> origin_unit;
    for (const auto& o : ds.flow_origins()) origin_unit.emplace(o, origin_unit.size());
    for (std::size_t i = 0; i < flows.size(); ++i) unit_of[i] = origin_unit.at(flows[i].origin_zone_id);
    n_units = origin_unit.size();
  } else {
    for (std::size_t i = 0; i < flows.size(); ++i) unit_of[i] = i;
  }
  std::vector<int> unit_fold;
  if (p.mode == SplitMode::kKFold) {
    unit_fold = kfold_split(n_units, p.k, seed);
  } else {
    if (!(p.test_fraction > 0.0 && p.test_fraction < 1.0)) {
      raise(ErrorCode::kProtocol, "test_fraction must lie in (0, 1)");
    }
    const auto held = nn::validation_split(n_units, p.test_fraction, seed);
    if (held.empty()) raise(ErrorCode::kProtocol, "holdout split leaves no test items");
    unit_fold.assign(n_units, 1);  // 1 = train
    for (std::size_t u : held) unit_fold[u] = 0;
  }
  std::vector<int> fold(flows.size());
  for (std::size_t i = 0; i < flows.size(); ++i) fold[i] = unit_fold[unit_of[i]];
  return fold;
}

FoldCell run_cell(const ModelConfig& config, const ODDataset& ds,
                  const std::vector<FeatureRow>& observed, const std::vector<FeatureRow>& eval_rows,
                  const std::map<PairKey, std::size_t>& eval_index, const std::vector<int>& fold,
                  int test_fold, FoldCell cell, bool keep_curve) {
  const auto& flows = ds.flows();
  std::vector<FlowRecord> train_flows;
  std::vector<PairKey> test_pairs;
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < flows.size(); ++i) {
    if (fold[i] == test_fold) {
      test_idx.push_back(i);
      test_pairs.push_back({flows[i].origin_zone_id, flows[i].hospital_id});
    } else {
      train_idx.push_back(i);
      train_flows.push_back(flows[i]);
    }
  }
  cell.n_train = train_idx.size();
  cell.n_test = test_idx.size();
  try {
    ModelConfig cfg = config;
    set_seed(cfg, cell.seed);
    std::vector<FeatureRow> train_rows;
    if (uses_choice_sets(cfg)) {
      // Held-out pairs leave the choice sets; the remaining observed shares
      // are renormalised within each origin.
      const ODDataset train_ds = ds.with_flows(train_flows);
      train_rows = assemble_candidates(train_ds, normalize_per_origin(train_flows), test_pairs);
    } else {
      for (std::size_t i : train_idx) train_rows.push_back(observed[i]);
    }
    const ModelArtifact art = fit_model(cfg, train_rows);
    const std::vector<double> pred = predict(art, eval_rows);
    std::vector<double> y, y_hat;
    for (std::size_t i : test_idx) {
      y.push_back(observed[i].target_share);
      y_hat.push_back(std::max(0.0, pred[eval_index.at({flows[i].origin_zone_id, flows[i].hospital_id})]));
    }
    cell.metrics = compute_metrics(y, y_hat);
    if (keep_curve) cell.loss_curve = art.loss_curve;
    cell.ok = true;
  } catch (const Error& e) {
    cell.ok = false;
    cell.error = fmt::format("{}: {}", error_code_name(e.code()), e.what());
  }
  return cell;
}

}  // namespace

Aggregate aggregate(std::span<const double> v) {
  Aggregate a;
  if (v.empty()) return a;
  double s = 0.0;
  for (double x : v) s += x;
  a.mean = s / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - a.mean) * (x - a.mean);
    a.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return a;
}

void refresh_aggregates(EvalReport& r) {
  std::vector<double> a, b, c;
  r.n_failed = 0;
  for (const auto& cell : r.cells) {
    if (!cell.ok) {
      ++r.n_failed;
      continue;
    }
    a.push_back(cell.metrics.nrmse);
    b.push_back(cell.metrics.smape);
    c.push_back(cell.metrics.cpc);
  }
  r.nrmse = aggregate(a);
  r.smape = aggregate(b);
  r.cpc = aggregate(c);
}

EvalReport cross_validate(const ModelConfig& config, const ODDataset& ds,
                          const ProtocolConfig& p) {
  if (p.runs < 1) raise(ErrorCode::kProtocol, "runs must be >= 1");
  if (ds.flows().empty()) raise(ErrorCode::kEmptyDataset, "dataset has no flows");
  if (p.mode == SplitMode::kKFold && ds.flows().size() < static_cast<std::size_t>(std::max(p.k, 0))) {
    raise(ErrorCode::kProtocol,
          fmt::format("{} rows cannot fill {} folds", ds.flows().size(), p.k));
  }
  EvalReport report;
  report.model_config = config_to_json(config);
  report.protocol = p;

  const std::vector<FeatureRow> observed = assemble_features(ds);
  const std::vector<FeatureRow> eval_rows =
      uses_choice_sets(config) ? assemble_candidates(ds) : observed;
  std::map<PairKey, std::size_t> eval_index;
  for (std::size_t i = 0; i < eval_rows.size(); ++i) {
    eval_index.emplace(PairKey{eval_rows[i].origin_zone_id, eval_rows[i].hospital_id}, i);
  }

  for (int run = 0; run < p.runs; ++run) {
    const std::uint64_t seed = p.base_seed + static_cast<std::uint64_t>(run);
    const std::vector<int> fold = assign_cells(ds, p, seed);
    const int n_cells = p.mode == SplitMode::kKFold ? p.k : 1;
    for (int f = 0; f < n_cells; ++f) {
      FoldCell cell;
      cell.run = run;
      cell.fold = f;
      cell.seed = seed;
      report.cells.push_back(run_cell(config, ds, observed, eval_rows, eval_index, fold, f,
                                      std::move(cell), p.keep_loss_curves));
    }
  }
  refresh_aggregates(report);
  return report;
}

std::string format_mean_std(const Aggregate& a) {
  return fmt::format("{:.2f} ± {:.4f}", a.mean, a.std);
}

nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) {
    nlohmann::json j = {{"run", c.run},     {"fold", c.fold},       {"seed", c.seed},
                        {"ok", c.ok},       {"n_train", c.n_train}, {"n_test", c.n_test}};
    if (c.ok) {
      j["nrmse"] = c.metrics.nrmse;
      j["smape"] = c.metrics.smape;
      j["cpc"] = c.metrics.cpc;
    } else {
      j["error"] = c.error;
    }
    if (!c.loss_curve.empty()) {
      nlohmann::json curve = nlohmann::json::array();
      for (const auto& lp : c.loss_curve) {
        curve.push_back({lp.epoch, lp.train_loss,
                         std::isfinite(lp.val_loss) ? nlohmann::json(lp.val_loss) : nlohmann::json()});
      }
      j["loss_curve"] = curve;
    }
    cells.push_back(std::move(j));
  }
  auto agg = [](const Aggregate& a) {
    return nlohmann::json{{"mean", a.mean}, {"std", a.std}, {"formatted", format_mean_std(a)}};
  };
  return {{"model", r.model_config},
          {"protocol", protocol_to_json(r.protocol)},
          {"cells", cells},
          {"aggregate", {{"nrmse", agg(r.nrmse)}, {"smape", agg(r.smape)}, {"cpc", agg(r.cpc)}}},
          {"n_failed", r.n_failed},
          {"complete", r.complete()}};
}

std::string report_csv(const EvalReport& r) {
  std::string out = "run,fold,nrmse,smape,cpc\n";
  for (const auto& c : r.cells) {
    if (!c.ok) continue;
    out += fmt::format("{},{},{},{},{}\n", c.run, c.fold, csv::format_double(c.metrics.nrmse),
                       csv::format_double(c.metrics.smape), csv::format_double(c.metrics.cpc));
  }
  return out;
}

std::string report_summary(const EvalReport& r) {
  std::string out = fmt::format("NRMSE: {}\nSMAPE: {}\nCPC: {}\n", format_mean_std(r.nrmse),
                                format_mean_std(r.smape), format_mean_std(r.cpc));
  if (!r.complete()) {
    out += fmt::format("incomplete: {} of {} cells failed\n", r.n_failed, r.cells.size());
  }
  return out;
}

}  // namespace odflow
