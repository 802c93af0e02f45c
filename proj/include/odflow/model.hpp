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
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "odflow/features.hpp"
#include "odflow/nn.hpp"

namespace odflow {

enum class Family { kOls, kGbt, kMlp, kDeepGravity, kHgnn };

std::string_view family_name(Family f);
Family parse_family(std::string_view name);

/// Training objective of the choice models. `kSoftmax` normalises scores
/// within each origin's candidate set and minimises cross-entropy against
/// the target shares; `kMse` regresses the raw score on the share.
enum class Objective { kSoftmax, kMse };

std::string_view objective_name(Objective o);
Objective parse_objective(std::string_view name);

struct OlsConfig {
  double ridge_eps = 1e-8;
};

struct GbtConfig {
  int n_stages = 300;
  int max_depth = 3;
  double learning_rate = 0.1;
  int min_samples_leaf = 5;
};

struct MlpConfig {
  std::vector<std::size_t> hidden_sizes = {64, 32};
  int epochs = 800;
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
};

struct DeepGravityConfig {
  std::vector<std::size_t> origin_encoder = {32};
  std::vector<std::size_t> destination_encoder = {32};
  std::vector<std::size_t> distance_encoder = {8};
  std::vector<std::size_t> decoder = {64, 32};
  int epochs = 400;
  /// Rows per minibatch; in softmax mode whole origins are packed until
  /// the batch reaches this many rows.
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  double validation_fraction = 0.1;
  Objective objective = Objective::kSoftmax;
  std::uint64_t seed = 0;
};

struct HgnnConfig {
  std::vector<std::size_t> zone_encoder = {32};
  std::vector<std::size_t> hospital_encoder = {32};
  std::vector<std::size_t> distance_encoder = {8};
  int n_conv_layers = 2;
  double weight_zone = 1.0;      // weight_B
  double weight_hospital = 1.0;  // weight_H
  double weight_distance = 4.0;  // weight_D
  std::vector<std::size_t> head = {32};
  int epochs = 400;
  /// One full-graph optimiser step per epoch.
  double learning_rate = 5e-3;
  double validation_fraction = 0.1;
  Objective objective = Objective::kSoftmax;
  std::uint64_t seed = 0;
};

using ModelConfig = std::variant<OlsConfig, GbtConfig, MlpConfig, DeepGravityConfig, HgnnConfig>;

Family config_family(const ModelConfig& config);

/// True when the family normalises predictions within each origin and must
/// therefore be trained and scored on full candidate sets.
bool uses_choice_sets(const ModelConfig& config);

void set_seed(ModelConfig& config, std::uint64_t seed);

nlohmann::json config_to_json(const ModelConfig& config);
/// Parses {"family": ..., <hyperparameters>}; unknown keys are rejected.
ModelConfig config_from_json(const nlohmann::json& j);

struct LossPoint {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN when no validation split was held out
};

// ---- per-family frozen parameters ------------------------------------------

struct OlsParams {
  double intercept = 0.0;
  std::vector<double> coef;  // on standardized features
  double ridge_eps = 0.0;
  bool singular = false;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;
  double eval(std::span<const double> x) const;
};

struct GbtParams {
  double base = 0.0;
  double learning_rate = 0.1;
  std::vector<Tree> trees;
  std::vector<double> stage_mse;
};

struct MlpParams {
  nn::Mlp net;
};

struct DeepGravityNet {
  nn::Mlp origin_encoder;
  nn::Mlp destination_encoder;
  nn::Mlp distance_encoder;
  nn::Mlp decoder;

  /// Scores for standardized feature rows (n x 22).
  std::vector<double> infer(const nn::Matrix& x) const;
  std::vector<double> forward(const nn::Matrix& x);
  void backward(std::span<const double> grad_scores);
  void zero_grad();
  std::vector<nn::Param> params();
};

struct DeepGravityParams {
  DeepGravityNet net;
  Objective objective = Objective::kSoftmax;
};

struct HgnnNet;  // defined in hgnn.hpp

struct HgnnParams {
  std::shared_ptr<const HgnnNet> net;
  Objective objective = Objective::kSoftmax;
};

/// A trained model of any family with everything needed to score raw rows.
struct ModelArtifact {
  Family family = Family::kOls;
  FeatureStats stats;
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<LossPoint> loss_curve;
  std::variant<OlsParams, GbtParams, MlpParams, DeepGravityParams, HgnnParams> params;

  bool simplex() const;
  /// Average candidate-set size seen in training; the reference choice set
  /// for single-profile shares of simplex families.
  double reference_choice_size() const;
};

ModelArtifact fit_ols(std::span<const FeatureRow> rows, double ridge_eps = 1e-8);
ModelArtifact fit_gbt(std::span<const FeatureRow> rows, const GbtConfig& config,
                      std::uint64_t seed);
ModelArtifact fit_mlp(std::span<const FeatureRow> rows, const MlpConfig& config);
/// `rows` must hold each origin's full candidate set (unobserved pairs with
/// target 0) in softmax mode.
ModelArtifact fit_deep_gravity(std::span<const FeatureRow> rows,
                               const DeepGravityConfig& config);

/// Dispatch on the config's family. Choice-set families expect candidate
/// rows; HGNN builds its graph from the rows.
ModelArtifact fit_model(const ModelConfig& config, std::span<const FeatureRow> rows);

/// One prediction per row. Simplex families normalise within each origin
/// over the rows supplied, so callers pass whole candidate sets.
std::vector<double> predict(const ModelArtifact& artifact, std::span<const FeatureRow> rows);

/// Per-row raw scores (pre-softmax for choice models; equal to predict()
/// for the regression families). Rows are scored independently, except for
/// HGNN, whose scores depend on the graph the rows define.
std::vector<double> raw_scores(const ModelArtifact& artifact, std::span<const FeatureRow> rows);

/// Evaluates independent feature profiles (raw units). Regression families
/// return their prediction. Simplex families return the profile's share in
/// a reference choice set whose other members all sit at the training-mean
/// profile: 1 / (1 + (H - 1) exp(s_mean - s)).
std::vector<double> predict_profiles(const ModelArtifact& artifact,
                                     std::span<const FeatureVector> profiles);

/// OLS coefficients mapped back to raw feature units: (intercept, weights).
std::pair<double, std::vector<double>> ols_raw_coefficients(const ModelArtifact& artifact);

nlohmann::json artifact_to_json(const ModelArtifact& artifact);
ModelArtifact artifact_from_json(const nlohmann::json& j);
void save_artifact(const ModelArtifact& artifact, const std::filesystem::path& path);
ModelArtifact load_artifact(const std::filesystem::path& path);

std::string loss_curve_csv(std::span<const LossPoint> curve);

/// Standardized feature matrix (n x 22).
nn::Matrix feature_matrix(std::span<const FeatureRow> rows, const FeatureStats& stats);

}  // namespace odflow
