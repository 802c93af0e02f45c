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

#include "odflow/hgnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <fmt/format.h>

#include "odflow/csv.hpp"
#include "odflow/error.hpp"

namespace odflow {

FeatureVector HeteroGraph::edge_features(std::size_t e) const {
  const Edge& ed = edges[e];
  FeatureVector f{};
  const auto& h = hospital_features[ed.hospital];
  const auto& z = zone_features[ed.zone];
  std::copy(h.begin(), h.end(), f.begin() + kHospitalBlockBegin);
  std::copy(z.begin(), z.end(), f.begin() + kZoneBlockBegin);
  f[kDriveTimeIndex] = ed.drive_time_min;
  return f;
}

std::size_t HeteroGraph::edge_index(const std::string& zone_id,
                                    const std::string& hospital_id) const {
  auto z = std::lower_bound(zone_ids.begin(), zone_ids.end(), zone_id);
  auto h = std::lower_bound(hospital_ids.begin(), hospital_ids.end(), hospital_id);
  if (z == zone_ids.end() || *z != zone_id || h == hospital_ids.end() || *h != hospital_id) {
    raise(ErrorCode::kPairing, fmt::format("pair ({}, {}) not in graph", zone_id, hospital_id));
  }
  const std::size_t zi = static_cast<std::size_t>(z - zone_ids.begin());
  const std::size_t hi = static_cast<std::size_t>(h - hospital_ids.begin());
  auto it = std::lower_bound(edges.begin(), edges.end(), std::pair{zi, hi},
                             [](const Edge& e, const std::pair<std::size_t, std::size_t>& k) {
                               return std::pair{e.zone, e.hospital} < k;
                             });
  if (it == edges.end() || it->zone != zi || it->hospital != hi) {
    raise(ErrorCode::kPairing, fmt::format("pair ({}, {}) not in graph", zone_id, hospital_id));
  }
  return static_cast<std::size_t>(it - edges.begin());
}

namespace {

ZoneFeatures zone_slice(const FeatureVector& f) {
  ZoneFeatures z{};
  std::copy(f.begin() + kZoneBlockBegin, f.begin() + kZoneBlockBegin + kNumZoneFeatures,
            z.begin());
  return z;
}

HospitalFeatures hospital_slice(const FeatureVector& f) {
  HospitalFeatures h{};
  std::copy(f.begin(), f.begin() + kNumHospitalFeatures, h.begin());
  return h;
}

void sort_edges(HeteroGraph& g) {
  std::sort(g.edges.begin(), g.edges.end(), [](const auto& a, const auto& b) {
    return std::pair{a.zone, a.hospital} < std::pair{b.zone, b.hospital};
  });
}

}  // namespace

HeteroGraph build_graph(const ODDataset& ds, CandidateRule rule) {
  HeteroGraph g;
  std::vector<const ZoneAttributes*> zones;
  for (const auto& z : ds.zones()) zones.push_back(&z);
  std::sort(zones.begin(), zones.end(),
            [](auto* a, auto* b) { return a->zone_id < b->zone_id; });
  std::vector<const HospitalAttributes*> hospitals;
  for (const auto& h : ds.hospitals()) hospitals.push_back(&h);
  std::sort(hospitals.begin(), hospitals.end(),
            [](auto* a, auto* b) { return a->hospital_id < b->hospital_id; });
  const HospitalAttributes dummy_h{};
  const ZoneAttributes dummy_z{};
  std::map<std::string, std::size_t> zi, hi;
  for (auto* z : zones) {
    zi[z->zone_id] = g.zone_ids.size();
    g.zone_ids.push_back(z->zone_id);
    g.zone_features.push_back(zone_slice(pair_features(*z, dummy_h, 0.0)));
  }
  for (auto* h : hospitals) {
    hi[h->hospital_id] = g.hospital_ids.size();
    g.hospital_ids.push_back(h->hospital_id);
    g.hospital_features.push_back(hospital_slice(pair_features(dummy_z, *h, 0.0)));
  }
  if (rule == CandidateRule::kAllPairs) {
    for (std::size_t a = 0; a < zones.size(); ++a) {
      for (std::size_t b = 0; b < hospitals.size(); ++b) {
        g.edges.push_back(
            {a, b, ds.require_drive_time(zones[a]->zone_id, hospitals[b]->hospital_id)});
      }
    }
  } else {
    for (const auto& f : ds.flows()) {
      g.edges.push_back({zi.at(f.origin_zone_id), hi.at(f.hospital_id),
                         ds.require_drive_time(f.origin_zone_id, f.hospital_id)});
    }
    sort_edges(g);
  }
  return g;
}

HeteroGraph build_graph(std::span<const FeatureRow> rows) {
  HeteroGraph g;
  std::map<std::string, ZoneFeatures> zones;
  std::map<std::string, HospitalFeatures> hospitals;
  for (const auto& r : rows) {
    zones.emplace(r.origin_zone_id, zone_slice(r.features));
    hospitals.emplace(r.hospital_id, hospital_slice(r.features));
  }
  std::map<std::string, std::size_t> zi, hi;
  for (const auto& [id, f] : zones) {
    zi[id] = g.zone_ids.size();
    g.zone_ids.push_back(id);
    g.zone_features.push_back(f);
  }
  for (const auto& [id, f] : hospitals) {
    hi[id] = g.hospital_ids.size();
    g.hospital_ids.push_back(id);
    g.hospital_features.push_back(f);
  }
  for (const auto& r : rows) {
    g.edges.push_back({zi.at(r.origin_zone_id), hi.at(r.hospital_id),
                       r.features[kDriveTimeIndex]});
  }
  sort_edges(g);
  for (std::size_t e = 1; e < g.edges.size(); ++e) {
    if (g.edges[e].zone == g.edges[e - 1].zone &&
        g.edges[e].hospital == g.edges[e - 1].hospital) {
      raise(ErrorCode::kIntegrity,
            fmt::format("duplicate pair ({}, {})", g.zone_ids[g.edges[e].zone],
                        g.hospital_ids[g.edges[e].hospital]));
    }
  }
  return g;
}

std::vector<FeatureRow> graph_rows(const HeteroGraph& g, std::span<const double> targets) {
  std::vector<FeatureRow> rows;
  rows.reserve(g.edges.size());
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    FeatureRow r;
    r.origin_zone_id = g.zone_ids[g.edges[e].zone];
    r.hospital_id = g.hospital_ids[g.edges[e].hospital];
    r.features = g.edge_features(e);
    r.target_share = targets.empty() ? 0.0 : targets[e];
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string graph_nodes_csv(const HeteroGraph& g) {
  std::string out = "id,type\n";
  for (const auto& z : g.zone_ids) out += fmt::format("{},zone\n", csv::escape(z));
  for (const auto& h : g.hospital_ids) out += fmt::format("{},hospital\n", csv::escape(h));
  return out;
}

std::string graph_edges_csv(const HeteroGraph& g) {
  std::string out = "src,dst,drive_time_min\n";
  for (const auto& e : g.edges) {
    out += fmt::format("{},{},{}\n", csv::escape(g.zone_ids[e.zone]),
                       csv::escape(g.hospital_ids[e.hospital]),
                       csv::format_double(e.drive_time_min));
  }
  for (const auto& e : g.mirrored_edges()) {
    out += fmt::format("{},{},{}\n", csv::escape(g.hospital_ids[e.hospital]),
                       csv::escape(g.zone_ids[e.zone]), csv::format_double(e.drive_time_min));
  }
  return out;
}

// ---- network ---------------------------------------------------------------

HgnnNet::Batch HgnnNet::prepare(const HeteroGraph& g, const FeatureStats& stats) {
  Batch b;
  const auto nz = static_cast<Eigen::Index>(g.zone_ids.size());
  const auto nh = static_cast<Eigen::Index>(g.hospital_ids.size());
  const auto ne = static_cast<Eigen::Index>(g.edges.size());
  auto z_of = [&](double v, std::size_t j) {
    return stats.is_constant(j) ? 0.0 : (v - stats.mean[j]) / stats.std[j];
  };
  b.zone_x.resize(nz, static_cast<Eigen::Index>(kNumZoneFeatures));
  for (Eigen::Index i = 0; i < nz; ++i) {
    for (std::size_t j = 0; j < kNumZoneFeatures; ++j) {
      b.zone_x(i, static_cast<Eigen::Index>(j)) =
          z_of(g.zone_features[static_cast<std::size_t>(i)][j], kZoneBlockBegin + j);
    }
  }
  b.hospital_x.resize(nh, static_cast<Eigen::Index>(kNumHospitalFeatures));
  for (Eigen::Index i = 0; i < nh; ++i) {
    for (std::size_t j = 0; j < kNumHospitalFeatures; ++j) {
      b.hospital_x(i, static_cast<Eigen::Index>(j)) =
          z_of(g.hospital_features[static_cast<std::size_t>(i)][j], kHospitalBlockBegin + j);
    }
  }
  b.time_x.resize(ne, 1);
  std::vector<double> zdeg(static_cast<std::size_t>(nz), 0.0), hdeg(static_cast<std::size_t>(nh), 0.0);
  for (Eigen::Index e = 0; e < ne; ++e) {
    const auto& ed = g.edges[static_cast<std::size_t>(e)];
    b.time_x(e, 0) = z_of(ed.drive_time_min, kDriveTimeIndex);
    b.edge_zone.push_back(ed.zone);
    b.edge_hospital.push_back(ed.hospital);
    zdeg[ed.zone] += 1.0;
    hdeg[ed.hospital] += 1.0;
  }
  std::vector<Eigen::Triplet<double>> tz, th;
  for (const auto& ed : g.edges) {
    tz.emplace_back(static_cast<int>(ed.zone), static_cast<int>(ed.hospital), 1.0 / zdeg[ed.zone]);
    th.emplace_back(static_cast<int>(ed.hospital), static_cast<int>(ed.zone),
                    1.0 / hdeg[ed.hospital]);
  }
  b.zone_mean.resize(nz, nh);
  b.zone_mean.setFromTriplets(tz.begin(), tz.end());
  b.hospital_mean.resize(nh, nz);
  b.hospital_mean.setFromTriplets(th.begin(), th.end());
  return b;
}

namespace {

nn::Matrix gather(const nn::Matrix& m, const std::vector<std::size_t>& idx) {
  nn::Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
  }
  return out;
}

void scatter_add(nn::Matrix& into, const nn::Matrix& rows, const std::vector<std::size_t>& idx,
                 double scale) {
  for (std::size_t i = 0; i < idx.size(); ++i) {
    into.row(static_cast<Eigen::Index>(idx[i])) += scale * rows.row(static_cast<Eigen::Index>(i));
  }
}

}  // namespace

std::vector<double> HgnnNet::infer(const Batch& b) const {
  nn::Matrix z = zone_encoder.infer(b.zone_x);
  nn::Matrix h = hospital_encoder.infer(b.hospital_x);
  for (const auto& c : convs) {
    const nn::Matrix zagg = b.zone_mean * h;
    const nn::Matrix hagg = b.hospital_mean * z;
    nn::Matrix zn = nn::relu(c.zone_self.infer(z) + c.zone_neighbor.infer(zagg));
    nn::Matrix hn = nn::relu(c.hospital_self.infer(h) + c.hospital_neighbor.infer(hagg));
    z = std::move(zn);
    h = std::move(hn);
  }
  const nn::Matrix t = distance_encoder.infer(b.time_x);
  nn::Matrix cat(t.rows(), z.cols() + h.cols() + t.cols());
  cat << weight_zone * gather(z, b.edge_zone), weight_hospital * gather(h, b.edge_hospital),
      weight_distance * t;
  const nn::Matrix s = head.infer(cat);
  return std::vector<double>(s.data(), s.data() + s.rows());
}

std::vector<double> HgnnNet::forward(const Batch& b) {
  cache_ = {};
  nn::Matrix z = zone_encoder.forward(b.zone_x);
  nn::Matrix h = hospital_encoder.forward(b.hospital_x);
  for (auto& c : convs) {
    cache_.zone_h.push_back(z);
    cache_.hospital_h.push_back(h);
    nn::Matrix zagg = b.zone_mean * h;
    nn::Matrix hagg = b.hospital_mean * z;
    nn::Matrix zpre = c.zone_self.forward(z) + c.zone_neighbor.forward(zagg);
    nn::Matrix hpre = c.hospital_self.forward(h) + c.hospital_neighbor.forward(hagg);
    z = nn::relu(zpre);
    h = nn::relu(hpre);
    cache_.zone_pre.push_back(std::move(zpre));
    cache_.hospital_pre.push_back(std::move(hpre));
  }
  cache_.zone_h.push_back(z);
  cache_.hospital_h.push_back(h);
  const nn::Matrix t = distance_encoder.forward(b.time_x);
  nn::Matrix cat(t.rows(), z.cols() + h.cols() + t.cols());
  cat << weight_zone * gather(z, b.edge_zone), weight_hospital * gather(h, b.edge_hospital),
      weight_distance * t;
  const nn::Matrix s = head.forward(cat);
  return std::vector<double>(s.data(), s.data() + s.rows());
}

void HgnnNet::backward(const Batch& b, std::span<const double> grad_scores) {
  nn::Matrix gs(static_cast<Eigen::Index>(grad_scores.size()), 1);
  for (std::size_t i = 0; i < grad_scores.size(); ++i) gs(static_cast<Eigen::Index>(i), 0) = grad_scores[i];
  const nn::Matrix gcat = head.backward(gs);
  const nn::Matrix& z_last = cache_.zone_h.back();
  const nn::Matrix& h_last = cache_.hospital_h.back();
  const Eigen::Index wz = z_last.cols();
  const Eigen::Index wh = h_last.cols();
  const Eigen::Index wt = gcat.cols() - wz - wh;
  nn::Matrix gz = nn::Matrix::Zero(z_last.rows(), wz);
  nn::Matrix gh = nn::Matrix::Zero(h_last.rows(), wh);
  scatter_add(gz, gcat.leftCols(wz), b.edge_zone, weight_zone);
  scatter_add(gh, gcat.middleCols(wz, wh), b.edge_hospital, weight_hospital);
  distance_encoder.backward(weight_distance * gcat.rightCols(wt));

  for (std::size_t k = convs.size(); k-- > 0;) {
    auto& c = convs[k];
    const nn::Matrix gzpre = nn::relu_backward(gz, cache_.zone_pre[k]);
    const nn::Matrix ghpre = nn::relu_backward(gh, cache_.hospital_pre[k]);
    // Dense caches its last input, so the layer pairs are re-run backward in
    // the order their forwards stored them.
    nn::Matrix gz_prev = c.zone_self.backward(gzpre);
    const nn::Matrix gzagg = c.zone_neighbor.backward(gzpre);
    nn::Matrix gh_prev = c.hospital_self.backward(ghpre);
    const nn::Matrix ghagg = c.hospital_neighbor.backward(ghpre);
    gh_prev += b.zone_mean.transpose() * gzagg;
    gz_prev += b.hospital_mean.transpose() * ghagg;
    gz = std::move(gz_prev);
    gh = std::move(gh_prev);
  }
  zone_encoder.backward(gz);
  hospital_encoder.backward(gh);
}

void HgnnNet::zero_grad() {
  zone_encoder.zero_grad();
  hospital_encoder.zero_grad();
  distance_encoder.zero_grad();
  for (auto& c : convs) {
    c.zone_self.zero_grad();
    c.zone_neighbor.zero_grad();
    c.hospital_self.zero_grad();
    c.hospital_neighbor.zero_grad();
  }
  head.zero_grad();
}

std::vector<nn::Param> HgnnNet::params() {
  std::vector<nn::Param> p;
  zone_encoder.collect(p, "zone_encoder");
  hospital_encoder.collect(p, "hospital_encoder");
  distance_encoder.collect(p, "distance_encoder");
  for (std::size_t k = 0; k < convs.size(); ++k) {
    convs[k].zone_self.collect(p, fmt::format("conv{}.zone_self", k));
    convs[k].zone_neighbor.collect(p, fmt::format("conv{}.zone_neighbor", k));
    convs[k].hospital_self.collect(p, fmt::format("conv{}.hospital_self", k));
    convs[k].hospital_neighbor.collect(p, fmt::format("conv{}.hospital_neighbor", k));
  }
  head.collect(p, "head");
  return p;
}

nlohmann::json HgnnNet::to_json() const {
  nlohmann::json convs_j = nlohmann::json::array();
  for (const auto& c : convs) {
    convs_j.push_back({{"zone_self", c.zone_self.to_json()},
                       {"zone_neighbor", c.zone_neighbor.to_json()},
                       {"hospital_self", c.hospital_self.to_json()},
                       {"hospital_neighbor", c.hospital_neighbor.to_json()}});
  }
  return {{"zone_encoder", zone_encoder.to_json()},
          {"hospital_encoder", hospital_encoder.to_json()},
          {"distance_encoder", distance_encoder.to_json()},
          {"convs", convs_j},
          {"head", head.to_json()},
          {"weight_zone", weight_zone},
          {"weight_hospital", weight_hospital},
          {"weight_distance", weight_distance}};
}

HgnnNet HgnnNet::from_json(const nlohmann::json& j) {
  HgnnNet n;
  n.zone_encoder = nn::Mlp::from_json(j.at("zone_encoder"));
  n.hospital_encoder = nn::Mlp::from_json(j.at("hospital_encoder"));
  n.distance_encoder = nn::Mlp::from_json(j.at("distance_encoder"));
  for (const auto& c : j.at("convs")) {
    n.convs.push_back({nn::Dense::from_json(c.at("zone_self")),
                       nn::Dense::from_json(c.at("zone_neighbor")),
                       nn::Dense::from_json(c.at("hospital_self")),
                       nn::Dense::from_json(c.at("hospital_neighbor"))});
  }
  n.head = nn::Mlp::from_json(j.at("head"));
  n.weight_zone = j.at("weight_zone").get<double>();
  n.weight_hospital = j.at("weight_hospital").get<double>();
  n.weight_distance = j.at("weight_distance").get<double>();
  return n;
}

// ---- training --------------------------------------------------------------

namespace {

double objective_loss(Objective obj, std::span<const double> scores,
                      std::span<const double> targets, const std::vector<std::size_t>& edges,
                      const nn::Groups& groups, std::vector<double>* grad) {
  if (obj == Objective::kSoftmax) return nn::softmax_ce_loss(scores, targets, groups, grad);
  // MSE restricted to the listed edges.
  const double n = static_cast<double>(edges.size());
  double sum = 0.0;
  if (grad) grad->assign(scores.size(), 0.0);
  for (std::size_t e : edges) {
    const double d = scores[e] - targets[e];
    sum += d * d;
    if (grad) (*grad)[e] = 2.0 * d / n;
  }
  return edges.empty() ? 0.0 : sum / n;
}

}  // namespace

ModelArtifact fit_hgnn(const HeteroGraph& graph, std::span<const double> targets,
                       const HgnnConfig& cfg) {
  if (graph.edges.empty()) raise(ErrorCode::kCandidate, "graph has no edges");
  if (targets.size() != graph.edges.size()) {
    raise(ErrorCode::kShape, fmt::format("{} targets for {} edges", targets.size(),
                                         graph.edges.size()));
  }
  if (cfg.epochs < 1) raise(ErrorCode::kConfig, "epochs must be >= 1");
  if (cfg.n_conv_layers < 1) raise(ErrorCode::kConfig, "n_conv_layers must be >= 1");
  if (cfg.weight_zone < 0 || cfg.weight_hospital < 0 || cfg.weight_distance < 0 ||
      cfg.weight_zone + cfg.weight_hospital + cfg.weight_distance <= 0) {
    raise(ErrorCode::kConfig, "fusion weights must be >= 0 and not all zero");
  }
  if (cfg.zone_encoder.empty() || cfg.hospital_encoder.empty() ||
      cfg.zone_encoder.back() != cfg.hospital_encoder.back()) {
    raise(ErrorCode::kConfig, "zone and hospital encoders must end in the same width");
  }

  const std::vector<FeatureRow> rows = graph_rows(graph, targets);
  ModelArtifact art;
  art.family = Family::kHgnn;
  art.stats = fit_feature_stats(rows);

  nn::Rng init(nn::mix_seed(cfg.seed, 0));
  auto net = std::make_shared<HgnnNet>();
  net->zone_encoder = nn::Mlp(kNumZoneFeatures, cfg.zone_encoder, true, init);
  net->hospital_encoder = nn::Mlp(kNumHospitalFeatures, cfg.hospital_encoder, true, init);
  net->distance_encoder = nn::Mlp(1, cfg.distance_encoder, true, init);
  const std::size_t width = cfg.zone_encoder.back();
  for (int k = 0; k < cfg.n_conv_layers; ++k) {
    net->convs.push_back({nn::Dense(width, width, true, init), nn::Dense(width, width, false, init),
                          nn::Dense(width, width, true, init),
                          nn::Dense(width, width, false, init)});
  }
  std::vector<std::size_t> head = cfg.head;
  head.push_back(1);
  net->head = nn::Mlp(2 * width + net->distance_encoder.out(), head, false, init);
  net->weight_zone = cfg.weight_zone;
  net->weight_hospital = cfg.weight_hospital;
  net->weight_distance = cfg.weight_distance;

  const HgnnNet::Batch batch = HgnnNet::prepare(graph, art.stats);

  // Units: zones (softmax) or edges (mse); a seeded tenth is held out.
  std::vector<std::vector<std::size_t>> zone_edges(graph.zone_ids.size());
  for (std::size_t e = 0; e < graph.edges.size(); ++e) zone_edges[graph.edges[e].zone].push_back(e);
  std::vector<std::vector<std::size_t>> units;
  std::size_t singletons = 0;
  std::size_t massless = 0;
  if (cfg.objective == Objective::kSoftmax) {
    for (const auto& edges : zone_edges) {
      if (edges.empty()) continue;
      if (edges.size() == 1) ++singletons;
      double mass = 0.0;
      for (std::size_t e : edges) mass += targets[e];
      if (!(mass > 0.0)) {
        ++massless;
        continue;
      }
      units.push_back(edges);
    }
    if (units.empty()) raise(ErrorCode::kCandidate, "no zone carries positive target mass");
  } else {
    for (std::size_t e = 0; e < graph.edges.size(); ++e) units.push_back({e});
  }
  const auto val = nn::validation_split(units.size(), cfg.validation_fraction, cfg.seed);
  nn::Groups train_groups, val_groups;
  std::vector<std::size_t> train_edges, val_edges;
  {
    std::size_t k = 0;
    for (std::size_t u = 0; u < units.size(); ++u) {
      const bool is_val = k < val.size() && val[k] == u;
      if (is_val) ++k;
      (is_val ? val_groups : train_groups).push_back(units[u]);
      auto& dst = is_val ? val_edges : train_edges;
      dst.insert(dst.end(), units[u].begin(), units[u].end());
    }
  }

  auto params = net->params();
  nn::Adam adam(cfg.learning_rate);
  std::vector<double> grad;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    net->zero_grad();
    const auto scores = net->forward(batch);
    const double loss =
        objective_loss(cfg.objective, scores, targets, train_edges, train_groups, &grad);
    if (!std::isfinite(loss)) {
      raise(ErrorCode::kDivergence, fmt::format("non-finite training loss at epoch {}", epoch));
    }
    net->backward(batch, grad);
    adam.step(params);
    const auto after = net->infer(batch);
    LossPoint lp;
    lp.epoch = epoch;
    lp.train_loss = objective_loss(cfg.objective, after, targets, train_edges, train_groups, nullptr);
    lp.val_loss = val.empty() ? std::numeric_limits<double>::quiet_NaN()
                              : objective_loss(cfg.objective, after, targets, val_edges,
                                               val_groups, nullptr);
    if (!std::isfinite(lp.train_loss)) {
      raise(ErrorCode::kDivergence, fmt::format("non-finite training loss at epoch {}", epoch));
    }
    art.loss_curve.push_back(lp);
  }

  art.metadata["final_train_loss"] = art.loss_curve.back().train_loss;
  art.metadata["final_val_loss"] = std::isfinite(art.loss_curve.back().val_loss)
                                       ? nlohmann::json(art.loss_curve.back().val_loss)
                                       : nlohmann::json(nullptr);
  art.metadata["train_units"] = units.size() - val.size();
  art.metadata["val_units"] = val.size();
  art.metadata["seed"] = cfg.seed;
  art.metadata["epochs"] = cfg.epochs;
  art.metadata["objective"] = objective_name(cfg.objective);
  art.metadata["optimizer"] = "adam";
  art.metadata["fusion_weights"] = {cfg.weight_zone, cfg.weight_hospital, cfg.weight_distance};
  art.metadata["n_conv_layers"] = cfg.n_conv_layers;
  art.metadata["aggregator"] = "mean";
  art.metadata["single_candidate_origins"] = singletons;
  art.metadata["origins_without_mass"] = massless;
  std::size_t with_edges = 0;
  for (const auto& e : zone_edges) with_edges += e.empty() ? 0 : 1;
  art.metadata["reference_choice_size"] =
      static_cast<double>(graph.edges.size()) / static_cast<double>(std::max<std::size_t>(with_edges, 1));
  art.metadata["assumptions"] = {
      "fusion weights scale the zone, hospital and drive-time embeddings, which are "
      "concatenated before the head",
      "mean neighbour aggregation with self and neighbour transforms per node type"};
  art.params = HgnnParams{std::move(net), cfg.objective};
  return art;
}

}  // namespace odflow
