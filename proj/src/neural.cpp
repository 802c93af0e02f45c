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

// Multilayer perceptron and Deep Gravity encoder-decoder.

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "odflow/error.hpp"
#include "odflow/model.hpp"
#include "trainer.hpp"

namespace odflow {

namespace {

std::vector<double> column(const nn::Matrix& m) {
  return std::vector<double>(m.data(), m.data() + m.rows());
}

nn::Matrix as_column(std::span<const double> v) {
  nn::Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
  return m;
}

/// Adapts an Mlp with a single output unit to the trainer's Net interface.
struct MlpScorer {
  nn::Mlp& net;
  std::vector<double> forward(const nn::Matrix& x) { return column(net.forward(x)); }
  std::vector<double> infer(const nn::Matrix& x) const { return column(net.infer(x)); }
  void backward(std::span<const double> g) { net.backward(as_column(g)); }
  void zero_grad() { net.zero_grad(); }
  std::vector<nn::Param> params() {
    std::vector<nn::Param> p;
    net.collect(p, "mlp");
    return p;
  }
};

std::vector<std::vector<std::size_t>> row_units(std::size_t n) {
  std::vector<std::vector<std::size_t>> u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = {i};
  return u;
}

nlohmann::json curve_summary(const detail::TrainOutcome& t) {
  return {{"final_train_loss", t.curve.back().train_loss},
          {"final_val_loss", std::isfinite(t.curve.back().val_loss)
                                 ? nlohmann::json(t.curve.back().val_loss)
                                 : nlohmann::json(nullptr)},
          {"train_units", t.train_units},
          {"val_units", t.val_units}};
}

constexpr Eigen::Index kZoneCols = static_cast<Eigen::Index>(kNumZoneFeatures);
constexpr Eigen::Index kHospitalCols = static_cast<Eigen::Index>(kNumHospitalFeatures);

}  // namespace

ModelArtifact fit_mlp(std::span<const FeatureRow> rows, const MlpConfig& cfg) {
  if (rows.empty()) raise(ErrorCode::kInsufficientData, "MLP needs at least 1 row");
  if (cfg.epochs < 1) raise(ErrorCode::kConfig, "epochs must be >= 1");
  if (cfg.batch_size < 1) raise(ErrorCode::kConfig, "batch_size must be >= 1");

  ModelArtifact art;
  art.family = Family::kMlp;
  art.stats = fit_feature_stats(rows);
  const nn::Matrix x = feature_matrix(rows, art.stats);
  std::vector<double> y(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) y[i] = rows[i].target_share;

  nn::Rng init(nn::mix_seed(cfg.seed, 0));
  std::vector<std::size_t> widths = cfg.hidden_sizes;
  widths.push_back(1);
  MlpParams params{nn::Mlp(kNumFeatures, widths, false, init)};
  MlpScorer scorer{params.net};
  detail::TrainOptions opt{cfg.epochs, cfg.batch_size, cfg.learning_rate,
                           cfg.validation_fraction, cfg.seed, Objective::kMse};
  auto outcome = detail::train_units(scorer, x, y, row_units(rows.size()), opt);

  art.loss_curve = outcome.curve;
  art.metadata = curve_summary(outcome);
  art.metadata["seed"] = cfg.seed;
  art.metadata["epochs"] = cfg.epochs;
  art.metadata["optimizer"] = "adam";
  art.metadata["loss"] = "mse";
  art.params = std::move(params);
  return art;
}

// ---- Deep Gravity ----------------------------------------------------------

std::vector<double> DeepGravityNet::infer(const nn::Matrix& x) const {
  const nn::Matrix eo = origin_encoder.infer(x.middleCols(kZoneBlockBegin, kZoneCols));
  const nn::Matrix ed = destination_encoder.infer(x.leftCols(kHospitalCols));
  const nn::Matrix et = distance_encoder.infer(x.col(kDriveTimeIndex));
  nn::Matrix cat(x.rows(), eo.cols() + ed.cols() + et.cols());
  cat << eo, ed, et;
  return column(decoder.infer(cat));
}

std::vector<double> DeepGravityNet::forward(const nn::Matrix& x) {
  const nn::Matrix eo = origin_encoder.forward(x.middleCols(kZoneBlockBegin, kZoneCols));
  const nn::Matrix ed = destination_encoder.forward(x.leftCols(kHospitalCols));
  const nn::Matrix et = distance_encoder.forward(x.col(kDriveTimeIndex));
  nn::Matrix cat(x.rows(), eo.cols() + ed.cols() + et.cols());
  cat << eo, ed, et;
  return column(decoder.forward(cat));
}

void DeepGravityNet::backward(std::span<const double> grad_scores) {
  const nn::Matrix g = decoder.backward(as_column(grad_scores));
  const auto wo = static_cast<Eigen::Index>(origin_encoder.out());
  const auto wd = static_cast<Eigen::Index>(destination_encoder.out());
  const auto wt = static_cast<Eigen::Index>(distance_encoder.out());
  origin_encoder.backward(g.leftCols(wo));
  destination_encoder.backward(g.middleCols(wo, wd));
  distance_encoder.backward(g.rightCols(wt));
}

void DeepGravityNet::zero_grad() {
  origin_encoder.zero_grad();
  destination_encoder.zero_grad();
  distance_encoder.zero_grad();
  decoder.zero_grad();
}

std::vector<nn::Param> DeepGravityNet::params() {
  std::vector<nn::Param> p;
  origin_encoder.collect(p, "origin_encoder");
  destination_encoder.collect(p, "destination_encoder");
  distance_encoder.collect(p, "distance_encoder");
  decoder.collect(p, "decoder");
  return p;
}

ModelArtifact fit_deep_gravity(std::span<const FeatureRow> rows,
                               const DeepGravityConfig& cfg) {
  if (rows.empty()) raise(ErrorCode::kCandidate, "empty candidate set");
  if (cfg.epochs < 1) raise(ErrorCode::kConfig, "epochs must be >= 1");
  if (cfg.batch_size < 1) raise(ErrorCode::kConfig, "batch_size must be >= 1");

  ModelArtifact art;
  art.family = Family::kDeepGravity;
  art.stats = fit_feature_stats(rows);
  const nn::Matrix x = feature_matrix(rows, art.stats);
  std::vector<double> y(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) y[i] = rows[i].target_share;

  nn::Rng init(nn::mix_seed(cfg.seed, 0));
  DeepGravityParams params;
  params.objective = cfg.objective;
  auto& net = params.net;
  net.origin_encoder = nn::Mlp(kNumZoneFeatures, cfg.origin_encoder, true, init);
  net.destination_encoder = nn::Mlp(kNumHospitalFeatures, cfg.destination_encoder, true, init);
  net.distance_encoder = nn::Mlp(1, cfg.distance_encoder, true, init);
  std::vector<std::size_t> dec = cfg.decoder;
  dec.push_back(1);
  net.decoder = nn::Mlp(net.origin_encoder.out() + net.destination_encoder.out() +
                            net.distance_encoder.out(),
                        dec, false, init);

  const auto groups = group_by_origin(rows);
  std::size_t singletons = 0;
  std::size_t massless = 0;
  std::vector<std::vector<std::size_t>> units;
  if (cfg.objective == Objective::kSoftmax) {
    for (const auto& g : groups) {
      double mass = 0.0;
      for (std::size_t r : g.rows) mass += y[r];
      if (g.rows.size() == 1) ++singletons;
      if (!(mass > 0.0)) {
        ++massless;
        continue;
      }
      units.push_back(g.rows);
    }
    if (units.empty()) raise(ErrorCode::kCandidate, "no origin carries positive target mass");
  } else {
    units = row_units(rows.size());
  }

  detail::TrainOptions opt{cfg.epochs, cfg.batch_size, cfg.learning_rate,
                           cfg.validation_fraction, cfg.seed, cfg.objective};
  auto outcome = detail::train_units(net, x, y, units, opt);

  art.loss_curve = outcome.curve;
  art.metadata = curve_summary(outcome);
  art.metadata["seed"] = cfg.seed;
  art.metadata["epochs"] = cfg.epochs;
  art.metadata["objective"] = objective_name(cfg.objective);
  art.metadata["optimizer"] = "adam";
  art.metadata["single_candidate_origins"] = singletons;
  art.metadata["origins_without_mass"] = massless;
  art.metadata["reference_choice_size"] =
      static_cast<double>(rows.size()) / static_cast<double>(groups.size());
  art.metadata["assumptions"] = {
      "loss, encoder widths, optimizer and negative-pair inclusion are configured "
      "defaults",
      "candidate set = every hospital for each origin; unobserved pairs have share 0"};
  art.params = std::move(params);
  return art;
}

}  // namespace odflow
