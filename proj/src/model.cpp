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

// Family dispatch, prediction and artifact serialization.

#include "odflow/model.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "odflow/csv.hpp"
#include "odflow/error.hpp"
#include "odflow/hgnn.hpp"

namespace odflow {

namespace {

constexpr int kArtifactVersion = 1;
constexpr const char* kArtifactFormat = "odflow-artifact";

}  // namespace

std::string_view family_name(Family f) {
  switch (f) {
    case Family::kOls: return "ols";
    case Family::kGbt: return "gbt";
    case Family::kMlp: return "mlp";
    case Family::kDeepGravity: return "deep_gravity";
    case Family::kHgnn: return "hgnn";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  for (Family f : {Family::kOls, Family::kGbt, Family::kMlp, Family::kDeepGravity, Family::kHgnn}) {
    if (family_name(f) == name) return f;
  }
  raise(ErrorCode::kConfig, fmt::format("unknown model family '{}'", name));
}

std::string_view objective_name(Objective o) {
  return o == Objective::kSoftmax ? "softmax" : "mse";
}

Objective parse_objective(std::string_view name) {
  if (name == "softmax" || name == "per_origin_softmax_ce") return Objective::kSoftmax;
  if (name == "mse") return Objective::kMse;
  raise(ErrorCode::kConfig, fmt::format("unknown objective '{}'", name));
}

Family config_family(const ModelConfig& c) {
  return std::visit(
      [](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, OlsConfig>) return Family::kOls;
        else if constexpr (std::is_same_v<T, GbtConfig>) return Family::kGbt;
        else if constexpr (std::is_same_v<T, MlpConfig>) return Family::kMlp;
        else if constexpr (std::is_same_v<T, DeepGravityConfig>) return Family::kDeepGravity;
        else return Family::kHgnn;
      },
      c);
}

bool uses_choice_sets(const ModelConfig& c) {
  if (const auto* d = std::get_if<DeepGravityConfig>(&c)) return d->objective == Objective::kSoftmax;
  if (const auto* h = std::get_if<HgnnConfig>(&c)) return h->objective == Objective::kSoftmax;
  return false;
}

void set_seed(ModelConfig& c, std::uint64_t seed) {
  std::visit(
      [seed](auto& v) {
        if constexpr (requires { v.seed; }) v.seed = seed;
      },
      c);
}

// ---- config JSON -----------------------------------------------------------

namespace {

/// Reads known keys out of an object and rejects anything left over.
class KeyReader {
 public:
  KeyReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) raise(ErrorCode::kConfig, fmt::format("{}: expected an object", path_));
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      raise(ErrorCode::kConfig, fmt::format("{}.{}: wrong value type", path_, key));
    }
  }

  void read_objective(Objective& out) {
    std::string s(objective_name(out));
    read("objective", s);
    try {
      out = parse_objective(s);
    } catch (const Error& e) {
      raise(ErrorCode::kConfig, fmt::format("{}.objective: {}", path_, e.what()));
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        raise(ErrorCode::kConfig, fmt::format("{}.{}: unknown key", path_, it.key()));
      }
    }
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

nlohmann::json config_to_json(const ModelConfig& c) {
  nlohmann::json j;
  j["family"] = family_name(config_family(c));
  std::visit(
      [&j](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, OlsConfig>) {
          j["ridge_eps"] = v.ridge_eps;
        } else if constexpr (std::is_same_v<T, GbtConfig>) {
          j["n_stages"] = v.n_stages;
          j["max_depth"] = v.max_depth;
          j["learning_rate"] = v.learning_rate;
          j["min_samples_leaf"] = v.min_samples_leaf;
        } else if constexpr (std::is_same_v<T, MlpConfig>) {
          j["hidden_sizes"] = v.hidden_sizes;
          j["epochs"] = v.epochs;
          j["batch_size"] = v.batch_size;
          j["learning_rate"] = v.learning_rate;
          j["validation_fraction"] = v.validation_fraction;
          j["seed"] = v.seed;
        } else if constexpr (std::is_same_v<T, DeepGravityConfig>) {
          j["origin_encoder"] = v.origin_encoder;
          j["destination_encoder"] = v.destination_encoder;
          j["distance_encoder"] = v.distance_encoder;
          j["decoder"] = v.decoder;
          j["epochs"] = v.epochs;
          j["batch_size"] = v.batch_size;
          j["learning_rate"] = v.learning_rate;
          j["validation_fraction"] = v.validation_fraction;
          j["objective"] = objective_name(v.objective);
          j["seed"] = v.seed;
        } else {
          j["zone_encoder"] = v.zone_encoder;
          j["hospital_encoder"] = v.hospital_encoder;
          j["distance_encoder"] = v.distance_encoder;
          j["n_conv_layers"] = v.n_conv_layers;
          j["weight_zone"] = v.weight_zone;
          j["weight_hospital"] = v.weight_hospital;
          j["weight_distance"] = v.weight_distance;
          j["head"] = v.head;
          j["epochs"] = v.epochs;
          j["learning_rate"] = v.learning_rate;
          j["validation_fraction"] = v.validation_fraction;
          j["objective"] = objective_name(v.objective);
          j["seed"] = v.seed;
        }
      },
      c);
  return j;
}

namespace {

ModelConfig config_from_json_at(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("family") || !j["family"].is_string()) {
    raise(ErrorCode::kConfig, fmt::format("{}.family: missing or not a string", path));
  }
  KeyReader r(j, path);
  std::string fam;
  r.read("family", fam);
  Family f;
  try {
    f = parse_family(fam);
  } catch (const Error& e) {
    raise(ErrorCode::kConfig, fmt::format("{}.family: {}", path, e.what()));
  }
  ModelConfig out;
  switch (f) {
    case Family::kOls: {
      OlsConfig c;
      r.read("ridge_eps", c.ridge_eps);
      out = c;
      break;
    }
    case Family::kGbt: {
      GbtConfig c;
      r.read("n_stages", c.n_stages);
      r.read("max_depth", c.max_depth);
      r.read("learning_rate", c.learning_rate);
      r.read("min_samples_leaf", c.min_samples_leaf);
      out = c;
      break;
    }
    case Family::kMlp: {
      MlpConfig c;
      r.read("hidden_sizes", c.hidden_sizes);
      r.read("epochs", c.epochs);
      r.read("batch_size", c.batch_size);
      r.read("learning_rate", c.learning_rate);
      r.read("validation_fraction", c.validation_fraction);
      r.read("seed", c.seed);
      out = c;
      break;
    }
    case Family::kDeepGravity: {
      DeepGravityConfig c;
      r.read("origin_encoder", c.origin_encoder);
      r.read("destination_encoder", c.destination_encoder);
      r.read("distance_encoder", c.distance_encoder);
      r.read("decoder", c.decoder);
      r.read("epochs", c.epochs);
      r.read("batch_size", c.batch_size);
      r.read("learning_rate", c.learning_rate);
      r.read("validation_fraction", c.validation_fraction);
      r.read_objective(c.objective);
      r.read("seed", c.seed);
      out = c;
      break;
    }
    case Family::kHgnn: {
      HgnnConfig c;
      r.read("zone_encoder", c.zone_encoder);
      r.read("hospital_encoder", c.hospital_encoder);
      r.read("distance_encoder", c.distance_encoder);
      r.read("n_conv_layers", c.n_conv_layers);
      r.read("weight_zone", c.weight_zone);
      r.read("weight_hospital", c.weight_hospital);
      r.read("weight_distance", c.weight_distance);
      r.read("head", c.head);
      r.read("epochs", c.epochs);
      r.read("learning_rate", c.learning_rate);
      r.read("validation_fraction", c.validation_fraction);
      r.read_objective(c.objective);
      r.read("seed", c.seed);
      out = c;
      break;
    }
  }
  r.finish();
  return out;
}

}  // namespace

ModelConfig config_from_json(const nlohmann::json& j) { return config_from_json_at(j, "model"); }

// ---- fitting ---------------------------------------------------------------

ModelArtifact fit_model(const ModelConfig& config, std::span<const FeatureRow> rows) {
  return std::visit(
      [rows](const auto& c) -> ModelArtifact {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, OlsConfig>) {
          return fit_ols(rows, c.ridge_eps);
        } else if constexpr (std::is_same_v<T, GbtConfig>) {
          return fit_gbt(rows, c, 0);
        } else if constexpr (std::is_same_v<T, MlpConfig>) {
          return fit_mlp(rows, c);
        } else if constexpr (std::is_same_v<T, DeepGravityConfig>) {
          return fit_deep_gravity(rows, c);
        } else {
          if (rows.empty()) raise(ErrorCode::kCandidate, "empty candidate set");
          const HeteroGraph g = build_graph(rows);
          std::vector<double> targets(g.edges.size());
          for (const auto& r : rows) {
            targets[g.edge_index(r.origin_zone_id, r.hospital_id)] = r.target_share;
          }
          return fit_hgnn(g, targets, c);
        }
      },
      config);
}

// ---- prediction ------------------------------------------------------------

bool ModelArtifact::simplex() const {
  if (const auto* d = std::get_if<DeepGravityParams>(&params)) return d->objective == Objective::kSoftmax;
  if (const auto* h = std::get_if<HgnnParams>(&params)) return h->objective == Objective::kSoftmax;
  return false;
}

double ModelArtifact::reference_choice_size() const {
  if (metadata.contains("reference_choice_size")) {
    return metadata["reference_choice_size"].get<double>();
  }
  return 1.0;
}

nn::Matrix feature_matrix(std::span<const FeatureRow> rows, const FeatureStats& stats) {
  if (stats.size() != kNumFeatures) {
    raise(ErrorCode::kShape,
          fmt::format("stats width {} does not match feature width {}", stats.size(), kNumFeatures));
  }
  nn::Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(kNumFeatures));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          stats.is_constant(j) ? 0.0 : (rows[i].features[j] - stats.mean[j]) / stats.std[j];
    }
  }
  return x;
}

namespace {

std::vector<double> hgnn_scores(const HgnnNet& net, const HeteroGraph& g, const FeatureStats& stats) {
  return net.infer(HgnnNet::prepare(g, stats));
}

std::vector<double> hgnn_row_scores(const HgnnParams& p, const FeatureStats& stats,
                                    std::span<const FeatureRow> rows) {
  const HeteroGraph g = build_graph(rows);
  const auto s = hgnn_scores(*p.net, g, stats);
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out[i] = s[g.edge_index(rows[i].origin_zone_id, rows[i].hospital_id)];
  }
  return out;
}

/// Each profile as its own one-edge graph: a zone and a hospital that only
/// see each other.
std::vector<double> hgnn_profile_scores(const HgnnParams& p, const FeatureStats& stats,
                                        std::span<const FeatureVector> profiles) {
  HeteroGraph g;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const auto& f = profiles[i];
    g.zone_ids.push_back(fmt::format("z{}", i));
    g.hospital_ids.push_back(fmt::format("h{}", i));
    ZoneFeatures z{};
    HospitalFeatures h{};
    std::copy(f.begin() + kZoneBlockBegin, f.begin() + kZoneBlockBegin + kNumZoneFeatures, z.begin());
    std::copy(f.begin(), f.begin() + kNumHospitalFeatures, h.begin());
    g.zone_features.push_back(z);
    g.hospital_features.push_back(h);
    g.edges.push_back({i, i, f[kDriveTimeIndex]});
  }
  if (profiles.empty()) return {};
  return hgnn_scores(*p.net, g, stats);
}

std::vector<double> matrix_scores(const ModelArtifact& art, const nn::Matrix& x) {
  const auto n = static_cast<std::size_t>(x.rows());
  return std::visit(
      [&](const auto& p) -> std::vector<double> {
        using T = std::decay_t<decltype(p)>;
        std::vector<double> out(n);
        if constexpr (std::is_same_v<T, OlsParams>) {
          for (std::size_t i = 0; i < n; ++i) {
            double s = p.intercept;
            for (std::size_t j = 0; j < kNumFeatures; ++j) {
              s += p.coef[j] * x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            }
            out[i] = s;
          }
        } else if constexpr (std::is_same_v<T, GbtParams>) {
          for (std::size_t i = 0; i < n; ++i) {
            const auto row = x.row(static_cast<Eigen::Index>(i));
            const std::span<const double> xs(row.data(), kNumFeatures);
            double s = p.base;
            for (const auto& t : p.trees) s += t.eval(xs);
            out[i] = s;
          }
        } else if constexpr (std::is_same_v<T, MlpParams>) {
          const nn::Matrix y = p.net.infer(x);
          out.assign(y.data(), y.data() + y.rows());
        } else if constexpr (std::is_same_v<T, DeepGravityParams>) {
          out = p.net.infer(x);
        } else {
          raise(ErrorCode::kConfig, "graph model scores need rows or profiles");
        }
        return out;
      },
      art.params);
}

}  // namespace

std::vector<double> raw_scores(const ModelArtifact& art, std::span<const FeatureRow> rows) {
  if (rows.empty()) return {};
  if (const auto* h = std::get_if<HgnnParams>(&art.params)) {
    return hgnn_row_scores(*h, art.stats, rows);
  }
  return matrix_scores(art, feature_matrix(rows, art.stats));
}

std::vector<double> predict(const ModelArtifact& art, std::span<const FeatureRow> rows) {
  std::vector<double> s = raw_scores(art, rows);
  if (!art.simplex()) return s;
  nn::Groups groups;
  for (auto& g : group_by_origin(rows)) groups.push_back(std::move(g.rows));
  return nn::group_softmax(s, groups);
}

std::vector<double> predict_profiles(const ModelArtifact& art,
                                     std::span<const FeatureVector> profiles) {
  if (profiles.empty()) return {};
  auto score = [&](std::span<const FeatureVector> ps) {
    if (const auto* h = std::get_if<HgnnParams>(&art.params)) {
      return hgnn_profile_scores(*h, art.stats, ps);
    }
    std::vector<FeatureRow> rows(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) rows[i].features = ps[i];
    return matrix_scores(art, feature_matrix(rows, art.stats));
  };
  std::vector<double> s = score(profiles);
  if (!art.simplex()) return s;
  FeatureVector mean{};
  std::copy(art.stats.mean.begin(), art.stats.mean.end(), mean.begin());
  const double s_mean = score(std::span<const FeatureVector>(&mean, 1))[0];
  const double others = std::max(art.reference_choice_size() - 1.0, 0.0);
  for (double& v : s) v = 1.0 / (1.0 + others * std::exp(s_mean - v));
  return s;
}

// ---- serialization ---------------------------------------------------------

namespace {

nlohmann::json num(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double num_of(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

nlohmann::json tree_to_json(const Tree& t) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : t.nodes) {
    if (n.feature < 0) {
      nodes.push_back({{"value", n.value}});
    } else {
      nodes.push_back(
          {{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
    }
  }
  return nodes;
}

Tree tree_from_json(const nlohmann::json& j) {
  Tree t;
  for (const auto& n : j) {
    TreeNode nd;
    if (n.contains("feature")) {
      nd.feature = n.at("feature").get<int>();
      nd.threshold = n.at("threshold").get<double>();
      nd.left = n.at("left").get<int>();
      nd.right = n.at("right").get<int>();
    } else {
      nd.value = n.at("value").get<double>();
    }
    t.nodes.push_back(nd);
  }
  const auto size = static_cast<int>(t.nodes.size());
  for (const auto& nd : t.nodes) {
    if (nd.feature >= static_cast<int>(kNumFeatures) ||
        (nd.feature >= 0 && (nd.left < 0 || nd.left >= size || nd.right < 0 || nd.right >= size))) {
      raise(ErrorCode::kFormat, "malformed tree node");
    }
  }
  return t;
}

nlohmann::json dg_to_json(const DeepGravityNet& n) {
  return {{"origin_encoder", n.origin_encoder.to_json()},
          {"destination_encoder", n.destination_encoder.to_json()},
          {"distance_encoder", n.distance_encoder.to_json()},
          {"decoder", n.decoder.to_json()}};
}

}  // namespace

nlohmann::json artifact_to_json(const ModelArtifact& art) {
  nlohmann::json j;
  j["format"] = kArtifactFormat;
  j["version"] = kArtifactVersion;
  j["family"] = family_name(art.family);
  j["stats"] = {{"mean", art.stats.mean},
                {"std", art.stats.std},
                {"min", art.stats.min},
                {"max", art.stats.max}};
  j["metadata"] = art.metadata;
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& p : art.loss_curve) curve.push_back({p.epoch, num(p.train_loss), num(p.val_loss)});
  j["loss_curve"] = curve;
  j["params"] = std::visit(
      [](const auto& p) -> nlohmann::json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, OlsParams>) {
          return {{"intercept", p.intercept},
                  {"coef", p.coef},
                  {"ridge_eps", p.ridge_eps},
                  {"singular", p.singular}};
        } else if constexpr (std::is_same_v<T, GbtParams>) {
          nlohmann::json trees = nlohmann::json::array();
          for (const auto& t : p.trees) trees.push_back(tree_to_json(t));
          return {{"base", p.base},
                  {"learning_rate", p.learning_rate},
                  {"stage_mse", p.stage_mse},
                  {"trees", trees}};
        } else if constexpr (std::is_same_v<T, MlpParams>) {
          return {{"net", p.net.to_json()}};
        } else if constexpr (std::is_same_v<T, DeepGravityParams>) {
          return {{"objective", objective_name(p.objective)}, {"net", dg_to_json(p.net)}};
        } else {
          return {{"objective", objective_name(p.objective)}, {"net", p.net->to_json()}};
        }
      },
      art.params);
  return j;
}

ModelArtifact artifact_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kArtifactFormat) {
      raise(ErrorCode::kFormat, "not a model artifact");
    }
    const int version = j.at("version").get<int>();
    if (version != kArtifactVersion) {
      raise(ErrorCode::kFormat, fmt::format("unsupported artifact version {}", version));
    }
    ModelArtifact art;
    art.family = parse_family(j.at("family").get<std::string>());
    const auto& s = j.at("stats");
    art.stats.mean = s.at("mean").get<std::vector<double>>();
    art.stats.std = s.at("std").get<std::vector<double>>();
    art.stats.min = s.at("min").get<std::vector<double>>();
    art.stats.max = s.at("max").get<std::vector<double>>();
    if (art.stats.size() != kNumFeatures || art.stats.std.size() != kNumFeatures) {
      raise(ErrorCode::kShape, "artifact feature statistics have the wrong width");
    }
    art.metadata = j.at("metadata");
    for (const auto& p : j.at("loss_curve")) {
      art.loss_curve.push_back({p.at(0).get<int>(), num_of(p.at(1)), num_of(p.at(2))});
    }
    const auto& p = j.at("params");
    switch (art.family) {
      case Family::kOls: {
        OlsParams o;
        o.intercept = p.at("intercept").get<double>();
        o.coef = p.at("coef").get<std::vector<double>>();
        o.ridge_eps = p.at("ridge_eps").get<double>();
        o.singular = p.at("singular").get<bool>();
        if (o.coef.size() != kNumFeatures) raise(ErrorCode::kShape, "coefficient width mismatch");
        art.params = std::move(o);
        break;
      }
      case Family::kGbt: {
        GbtParams g;
        g.base = p.at("base").get<double>();
        g.learning_rate = p.at("learning_rate").get<double>();
        g.stage_mse = p.at("stage_mse").get<std::vector<double>>();
        for (const auto& t : p.at("trees")) g.trees.push_back(tree_from_json(t));
        art.params = std::move(g);
        break;
      }
      case Family::kMlp:
        art.params = MlpParams{nn::Mlp::from_json(p.at("net"))};
        break;
      case Family::kDeepGravity: {
        DeepGravityParams d;
        d.objective = parse_objective(p.at("objective").get<std::string>());
        const auto& n = p.at("net");
        d.net.origin_encoder = nn::Mlp::from_json(n.at("origin_encoder"));
        d.net.destination_encoder = nn::Mlp::from_json(n.at("destination_encoder"));
        d.net.distance_encoder = nn::Mlp::from_json(n.at("distance_encoder"));
        d.net.decoder = nn::Mlp::from_json(n.at("decoder"));
        art.params = std::move(d);
        break;
      }
      case Family::kHgnn: {
        HgnnParams h;
        h.objective = parse_objective(p.at("objective").get<std::string>());
        h.net = std::make_shared<HgnnNet>(HgnnNet::from_json(p.at("net")));
        art.params = std::move(h);
        break;
      }
    }
    return art;
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::kFormat, fmt::format("malformed artifact: {}", e.what()));
  }
}

void save_artifact(const ModelArtifact& art, const std::filesystem::path& path) {
  csv::write_file(path, artifact_to_json(art).dump(1) + "\n");
}

ModelArtifact load_artifact(const std::filesystem::path& path) {
  const std::string text = csv::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::kFormat, fmt::format("{}: {}", path.string(), e.what()));
  }
  return artifact_from_json(j);
}

std::string loss_curve_csv(std::span<const LossPoint> curve) {
  std::string out = "epoch,train_loss,val_loss\n";
  for (const auto& p : curve) {
    out += fmt::format("{},{},{}\n", p.epoch, csv::format_double(p.train_loss),
                       std::isfinite(p.val_loss) ? csv::format_double(p.val_loss) : "");
  }
  return out;
}

}  // namespace odflow
