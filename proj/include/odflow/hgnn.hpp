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

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "odflow/dataset.hpp"
#include "odflow/features.hpp"
#include "odflow/model.hpp"
#include "odflow/nn.hpp"

namespace odflow {

using ZoneFeatures = std::array<double, kNumZoneFeatures>;
using HospitalFeatures = std::array<double, kNumHospitalFeatures>;

/// Bipartite zone/hospital graph. Each stored edge is a zone->hospital
/// candidate pair carrying its drive time; the hospital->zone direction is
/// its mirror image. Nodes are kept sorted by id and edges by (zone,
/// hospital), so construction order never affects numerics.
struct HeteroGraph {
  struct Edge {
    std::size_t zone = 0;
    std::size_t hospital = 0;
    double drive_time_min = 0.0;
  };

  std::vector<std::string> zone_ids;
  std::vector<ZoneFeatures> zone_features;  // raw units
  std::vector<std::string> hospital_ids;
  std::vector<HospitalFeatures> hospital_features;
  std::vector<Edge> edges;

  /// hospital->zone edges (src = hospital) in the same order as `edges`.
  std::vector<Edge> mirrored_edges() const { return edges; }

  /// Raw 22-feature row of an edge.
  FeatureVector edge_features(std::size_t e) const;

  std::size_t edge_index(const std::string& zone_id, const std::string& hospital_id) const;
};

enum class CandidateRule {
  kAllPairs,       // every zone x every hospital
  kObservedFlows,  // only pairs with a flow
};

HeteroGraph build_graph(const ODDataset& dataset, CandidateRule rule = CandidateRule::kAllPairs);

/// Graph implied by a set of feature rows: one zone node per distinct
/// origin, one hospital node per distinct hospital, one edge per row.
HeteroGraph build_graph(std::span<const FeatureRow> rows);

/// Rows of the graph's edges, in edge order, with the given targets.
std::vector<FeatureRow> graph_rows(const HeteroGraph& graph, std::span<const double> targets);

std::string graph_nodes_csv(const HeteroGraph& graph);
std::string graph_edges_csv(const HeteroGraph& graph);

/// Heterogeneous GraphSAGE network: per-type encoders, mean-aggregating
/// convolutions per edge type, weighted fusion of the zone, hospital and
/// drive-time blocks, and a scoring head.
struct HgnnNet {
  struct Conv {
    nn::Dense zone_self;
    nn::Dense zone_neighbor;
    nn::Dense hospital_self;
    nn::Dense hospital_neighbor;
  };

  nn::Mlp zone_encoder;
  nn::Mlp hospital_encoder;
  nn::Mlp distance_encoder;
  std::vector<Conv> convs;
  nn::Mlp head;
  double weight_zone = 1.0;
  double weight_hospital = 1.0;
  double weight_distance = 4.0;

  /// Inputs after standardization, ready for a forward pass.
  struct Batch {
    nn::Matrix zone_x;      // Nz x 12
    nn::Matrix hospital_x;  // Nh x 9
    nn::Matrix time_x;      // E x 1
    std::vector<std::size_t> edge_zone;
    std::vector<std::size_t> edge_hospital;
    Eigen::SparseMatrix<double, Eigen::RowMajor> zone_mean;      // Nz x Nh
    Eigen::SparseMatrix<double, Eigen::RowMajor> hospital_mean;  // Nh x Nz
  };

  static Batch prepare(const HeteroGraph& graph, const FeatureStats& stats);

  std::vector<double> infer(const Batch& batch) const;
  std::vector<double> forward(const Batch& batch);
  void backward(const Batch& batch, std::span<const double> grad_scores);
  void zero_grad();
  std::vector<nn::Param> params();

  nlohmann::json to_json() const;
  static HgnnNet from_json(const nlohmann::json& j);

 private:
  struct Cache {
    std::vector<nn::Matrix> zone_h, hospital_h;  // per layer inputs (0 = encoders)
    std::vector<nn::Matrix> zone_pre, hospital_pre;
    std::vector<nn::Matrix> zone_agg, hospital_agg;
  };
  Cache cache_;
};

/// Trains on every edge of `graph`; `targets` holds one share per edge.
ModelArtifact fit_hgnn(const HeteroGraph& graph, std::span<const double> targets,
                       const HgnnConfig& config);

}  // namespace odflow
