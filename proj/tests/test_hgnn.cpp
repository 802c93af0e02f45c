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
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "odflow/hgnn.hpp"
#include "odflow/error.hpp"
#include "odflow/model.hpp"
#include "test_util.hpp"

namespace odflow {
namespace {

HgnnConfig small_config() {
  HgnnConfig c;
  c.zone_encoder = {6};
  c.hospital_encoder = {6};
  c.distance_encoder = {3};
  c.head = {4};
  c.epochs = 3;
  c.validation_fraction = 0.0;
  return c;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

TEST(Graph, AllPairsCounts) {
  const auto g = build_graph(test::random_dataset(4, 3, 1, 0.4), CandidateRule::kAllPairs);
  EXPECT_EQ(g.zone_ids.size(), 4u);
  EXPECT_EQ(g.hospital_ids.size(), 3u);
  EXPECT_EQ(g.edges.size(), 12u);
  EXPECT_EQ(g.mirrored_edges().size(), 12u);
  EXPECT_EQ(count_lines(graph_edges_csv(g)), 1u + 24u);
  EXPECT_EQ(count_lines(graph_nodes_csv(g)), 1u + 7u);
}

TEST(Graph, IsolatedZoneIsKept) {
  const auto full = test::random_dataset(4, 3, 2);
  std::vector<FlowRecord> flows;
  for (const auto& f : full.flows())
    if (f.origin_zone_id != "z003") flows.push_back(f);
  const auto g = build_graph(full.with_flows(flows), CandidateRule::kObservedFlows);
  EXPECT_EQ(g.zone_ids.size(), 4u);
  for (const auto& e : g.edges) EXPECT_NE(g.zone_ids[e.zone], "z003");
  EXPECT_EQ(g.edges.size(), flows.size());
}

TEST(Graph, EdgeFeaturesMatchRows) {
  const auto ds = test::random_dataset(3, 4, 3);
  const auto g = build_graph(ds);
  for (const auto& r : assemble_features(ds)) {
    EXPECT_EQ(g.edge_features(g.edge_index(r.origin_zone_id, r.hospital_id)), r.features);
  }
  EXPECT_THROW(g.edge_index("z000", "nowhere"), Error);
}

TEST(Hgnn, FusionDefaults) {
  const HgnnConfig defaults;
  EXPECT_EQ(defaults.weight_zone, 1.0);
  EXPECT_EQ(defaults.weight_hospital, 1.0);
  EXPECT_EQ(defaults.weight_distance, 4.0);
  auto c = small_config();
  c.weight_zone = defaults.weight_zone;
  c.weight_hospital = defaults.weight_hospital;
  c.weight_distance = defaults.weight_distance;
  const auto rows = assemble_candidates(test::random_dataset(5, 3, 4));
  const auto art = fit_model(c, rows);
  EXPECT_EQ(art.metadata.at("fusion_weights"), nlohmann::json({1.0, 1.0, 4.0}));
}

TEST(Hgnn, GradientsMatchFiniteDifferences) {
  for (std::uint64_t probe = 0; probe < 5; ++probe) {
    const auto ds = test::random_dataset(4, 3, 300 + probe, 0.7);
    const auto g = build_graph(ds);
    const auto rows = graph_rows(g, std::vector<double>(g.edges.size(), 0.0));
    std::map<PairKey, double> share;
    for (const auto& r : assemble_candidates(ds)) share[{r.origin_zone_id, r.hospital_id}] = r.target_share;
    std::vector<double> t;
    std::vector<std::vector<std::size_t>> groups(g.zone_ids.size());
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      t.push_back(share.at({g.zone_ids[g.edges[e].zone], g.hospital_ids[g.edges[e].hospital]}));
      groups[g.edges[e].zone].push_back(e);
    }
    auto c = small_config();
    c.seed = probe;
    const auto art = fit_hgnn(g, t, c);
    HgnnNet net = *std::get<HgnnParams>(art.params).net;
    const auto batch = HgnnNet::prepare(g, art.stats);

    auto loss = [&] { return test::reference_ce(net.infer(batch), t, groups); };
    auto params = net.params();
    net.zero_grad();
    const auto s = net.forward(batch);
    std::vector<double> grad;
    nn::softmax_ce_loss(s, t, groups, &grad);
    net.backward(batch, grad);
    const auto r = test::finite_difference(params, test::grads_of(params), loss);
    EXPECT_LT(r.max_rel, 1e-4) << r.worst;
    // Encoders, both conv directions, fusion inputs and head all carry parameters.
    EXPECT_GT(r.checked, 200u);
  }
}

TEST(Hgnn, SharesFormSimplex) {
  const auto ds = test::random_dataset(50, 10, 5, 0.5);
  const auto rows = assemble_candidates(ds);
  const auto art = fit_model(small_config(), rows);
  const auto p = predict(art, rows);
  std::map<std::string, double> sum;
  for (std::size_t i = 0; i < rows.size(); ++i) sum[rows[i].origin_zone_id] += p[i];
  for (const auto& [o, s] : sum) EXPECT_NEAR(s, 1.0, 1e-9) << o;
}

TEST(Hgnn, NodeOrderDoesNotMatter) {
  const auto ds = test::random_dataset(6, 4, 6);
  auto rows = assemble_candidates(ds);
  const auto art = fit_model(small_config(), rows);
  const auto p = predict(art, rows);
  std::map<PairKey, double> by_pair;
  for (std::size_t i = 0; i < rows.size(); ++i) by_pair[{rows[i].origin_zone_id, rows[i].hospital_id}] = p[i];

  std::reverse(rows.begin(), rows.end());
  const auto q = predict(art, rows);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(q[i], by_pair.at({rows[i].origin_zone_id, rows[i].hospital_id}));
  }
}

TEST(Hgnn, IdenticalEquidistantHospitalsAreUniform) {
  std::mt19937_64 rng(7);
  const auto proto = test::random_hospital("h", rng);
  std::vector<HospitalAttributes> hosp;
  for (int j = 0; j < 5; ++j) {
    auto h = proto;
    h.hospital_id = fmt::format("h{}", j);
    hosp.push_back(h);
  }
  std::vector<ZoneAttributes> zones;
  std::map<PairKey, double> drive;
  std::vector<FlowRecord> flows;
  for (int i = 0; i < 4; ++i) {
    zones.push_back(test::random_zone(fmt::format("z{}", i), rng));
    const double t = test::unif(rng, 5, 40);
    for (const auto& h : hosp) {
      drive[{zones.back().zone_id, h.hospital_id}] = t;
      flows.push_back({zones.back().zone_id, h.hospital_id, std::round(test::unif(rng, 1, 40)), t});
    }
  }
  const auto ds = ODDataset::build(zones, hosp, flows, drive);
  const auto rows = assemble_candidates(ds);
  const auto p = predict(fit_model(small_config(), rows), rows);
  for (double v : p) EXPECT_NEAR(v, 0.2, 1e-15);
}

TEST(Hgnn, ArtifactRoundTrip) {
  const auto rows = assemble_candidates(test::random_dataset(6, 3, 8));
  const auto art = fit_model(small_config(), rows);
  const auto back = artifact_from_json(nlohmann::json::parse(artifact_to_json(art).dump()));
  EXPECT_EQ(predict(back, rows), predict(art, rows));
}

}  // namespace
}  // namespace odflow
