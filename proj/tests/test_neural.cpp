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

#include <cmath>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "odflow/model.hpp"
#include "test_util.hpp"

namespace odflow {
namespace {

/// Hospitals identical up to their id; each zone equidistant from all.
ODDataset identical_hospitals(std::size_t nz, std::size_t nh, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<ZoneAttributes> zones;
  std::vector<HospitalAttributes> hosp;
  const auto proto = test::random_hospital("h", rng);
  for (std::size_t j = 0; j < nh; ++j) {
    auto h = proto;
    h.hospital_id = fmt::format("h{}", j);
    hosp.push_back(h);
  }
  std::map<PairKey, double> drive;
  std::vector<FlowRecord> flows;
  for (std::size_t i = 0; i < nz; ++i) {
    zones.push_back(test::random_zone(fmt::format("z{}", i), rng));
    const double t = test::unif(rng, 5, 50);
    for (const auto& h : hosp) {
      drive[{zones.back().zone_id, h.hospital_id}] = t;
      flows.push_back({zones.back().zone_id, h.hospital_id, std::round(test::unif(rng, 1, 50)), t});
    }
  }
  return ODDataset::build(zones, hosp, flows, drive);
}

std::vector<std::vector<std::size_t>> origin_groups(const std::vector<FeatureRow>& rows) {
  std::vector<std::vector<std::size_t>> g;
  for (const auto& og : group_by_origin(rows)) g.push_back(og.rows);
  return g;
}

TEST(MlpNet, GradientsMatchFiniteDifferences) {
  for (std::uint64_t probe = 0; probe < 5; ++probe) {
    nn::Rng rng(100 + probe);
    nn::Mlp net(6, {5, 4, 1}, false, rng);
    nn::Matrix x(7, 6);
    std::vector<double> y(7);
    std::mt19937_64 data(probe);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = test::unif(data, -1, 1);
      y[static_cast<std::size_t>(i)] = test::unif(data, -1, 1);
    }
    auto loss = [&] {
      const nn::Matrix out = net.infer(x);
      double s = 0;
      for (Eigen::Index i = 0; i < out.rows(); ++i) s += std::pow(out(i, 0) - y[i], 2);
      return s / static_cast<double>(out.rows());
    };
    std::vector<nn::Param> params;
    net.collect(params, "mlp");
    // Random biases too: zero biases put dead-input rows exactly on a kink.
    for (auto& p : params)
      for (std::size_t i = 0; i < p.size; ++i) p.value[i] += test::unif(data, -0.3, 0.3);
    net.zero_grad();
    const nn::Matrix out = net.forward(x);
    nn::Matrix g(out.rows(), 1);
    for (Eigen::Index i = 0; i < out.rows(); ++i) g(i, 0) = 2.0 * (out(i, 0) - y[i]) / out.rows();
    net.backward(g);
    const auto r = test::finite_difference(params, test::grads_of(params), loss);
    EXPECT_LT(r.max_rel, 1e-4) << r.worst;
  }
}

TEST(DeepGravity, GradientsMatchFiniteDifferences) {
  for (std::uint64_t probe = 0; probe < 5; ++probe) {
    const auto ds = test::random_dataset(4, 5, 200 + probe, 0.6);
    const auto rows = assemble_candidates(ds);
    DeepGravityConfig c;
    c.origin_encoder = {6};
    c.destination_encoder = {5};
    c.distance_encoder = {3};
    c.decoder = {7, 4};
    c.epochs = 2;
    c.validation_fraction = 0.0;
    c.seed = probe;
    const auto art = fit_deep_gravity(rows, c);
    DeepGravityNet net = std::get<DeepGravityParams>(art.params).net;
    const nn::Matrix x = feature_matrix(rows, art.stats);
    const auto groups = origin_groups(rows);
    std::vector<double> t;
    for (const auto& r : rows) t.push_back(r.target_share);

    auto loss = [&] { return test::reference_ce(net.infer(x), t, groups); };
    auto params = net.params();
    net.zero_grad();
    const auto s = net.forward(x);
    std::vector<double> g;
    nn::softmax_ce_loss(s, t, groups, &g);
    net.backward(g);
    const auto r = test::finite_difference(params, test::grads_of(params), loss);
    EXPECT_LT(r.max_rel, 1e-4) << r.worst;
    EXPECT_GT(r.checked, 100u);
  }
}

TEST(DeepGravity, SharesFormSimplexPerOrigin) {
  const auto ds = test::random_dataset(50, 10, 3, 0.5);
  const auto rows = assemble_candidates(ds);
  DeepGravityConfig c;
  c.epochs = 3;
  const auto art = fit_deep_gravity(rows, c);
  const auto p = predict(art, rows);
  std::map<std::string, double> sum;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_GE(p[i], 0.0);
    sum[rows[i].origin_zone_id] += p[i];
  }
  for (const auto& [o, s] : sum) EXPECT_NEAR(s, 1.0, 1e-9) << o;
}

TEST(DeepGravity, IdenticalHospitalsGetUniformShares) {
  const auto ds = identical_hospitals(6, 4, 9);
  const auto rows = assemble_candidates(ds);
  DeepGravityConfig c;
  c.epochs = 3;
  const auto p = predict(fit_deep_gravity(rows, c), rows);
  for (double v : p) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(DeepGravity, SameSeedSameLossCurve) {
  const auto rows = assemble_candidates(test::random_dataset(12, 5, 4, 0.6));
  DeepGravityConfig c;
  c.epochs = 5;
  c.seed = 17;
  const auto a = fit_deep_gravity(rows, c);
  const auto b = fit_deep_gravity(rows, c);
  ASSERT_EQ(a.loss_curve.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(a.loss_curve[i].train_loss, b.loss_curve[i].train_loss);
  }
  EXPECT_EQ(artifact_to_json(a).dump(), artifact_to_json(b).dump());
}

TEST(DeepGravity, ArtifactRoundTrip) {
  const auto rows = assemble_candidates(test::random_dataset(8, 4, 5));
  DeepGravityConfig c;
  c.epochs = 2;
  const auto art = fit_deep_gravity(rows, c);
  const auto back = artifact_from_json(nlohmann::json::parse(artifact_to_json(art).dump()));
  EXPECT_EQ(predict(back, rows), predict(art, rows));
}

TEST(Mlp, NoHiddenLayersFitsLinearData) {
  std::mt19937_64 rng(3);
  std::vector<FeatureRow> rows(200);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].origin_zone_id = fmt::format("z{}", i);
    rows[i].features = test::random_profile(rng);
    rows[i].target_share = 2.0 * rows[i].features[0] - rows[i].features[1] + 3.0;
  }
  MlpConfig c;
  c.hidden_sizes = {};
  c.epochs = 3000;
  c.batch_size = 200;
  c.learning_rate = 1e-2;
  c.validation_fraction = 0.0;
  const auto art = fit_mlp(rows, c);
  const auto p = predict(art, rows);
  double mse = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) mse += std::pow(p[i] - rows[i].target_share, 2);
  EXPECT_LT(mse / rows.size(), 1e-6);
}

TEST(Mlp, SameSeedSameLossCurve) {
  const auto rows = assemble_features(test::random_dataset(10, 4, 6, 0.7));
  MlpConfig c;
  c.epochs = 4;
  c.seed = 3;
  EXPECT_EQ(artifact_to_json(fit_mlp(rows, c)).dump(), artifact_to_json(fit_mlp(rows, c)).dump());
}

}  // namespace
}  // namespace odflow
