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

#include "odflow/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "odflow/csv.hpp"
#include "odflow/error.hpp"
#include "odflow/nn.hpp"

namespace odflow {

ValueFn artifact_value_fn(const ModelArtifact& artifact) {
  return [&artifact](std::span<const FeatureVector> profiles) {
    return predict_profiles(artifact, profiles);
  };
}

// ---- grouping --------------------------------------------------------------

FeatureGrouping FeatureGrouping::singletons() {
  FeatureGrouping g;
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    g.groups.push_back({std::string(kFeatureNames[j]), {j}});
  }
  return g;
}

FeatureGrouping FeatureGrouping::all_beds() {
  return from_json(nlohmann::json::array(
      {{{"name", "All beds"}, {"features", {"staffed_all_beds", "licensed_all_beds"}}}}));
}

FeatureGrouping FeatureGrouping::from_json(const nlohmann::json& j) {
  if (!j.is_array()) raise(ErrorCode::kConfig, "grouping: expected an array of groups");
  std::vector<FeatureGroup> named;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& gj = j[i];
    const std::string path = fmt::format("grouping[{}]", i);
    if (!gj.is_object() || !gj.contains("name") || !gj.contains("features")) {
      raise(ErrorCode::kConfig, fmt::format("{}: needs 'name' and 'features'", path));
    }
    for (auto it = gj.begin(); it != gj.end(); ++it) {
      if (it.key() != "name" && it.key() != "features") {
        raise(ErrorCode::kConfig, fmt::format("{}.{}: unknown key", path, it.key()));
      }
    }
    FeatureGroup g;
    g.name = gj["name"].get<std::string>();
    for (const auto& f : gj["features"]) {
      if (f.is_string()) {
        g.features.push_back(feature_index(f.get<std::string>()));
      } else if (f.is_number_unsigned() && f.get<std::size_t>() < kNumFeatures) {
        g.features.push_back(f.get<std::size_t>());
      } else {
        raise(ErrorCode::kConfig, fmt::format("{}.features: bad feature {}", path, f.dump()));
      }
    }
    if (g.features.empty()) raise(ErrorCode::kConfig, fmt::format("{}: empty group", path));
    std::sort(g.features.begin(), g.features.end());
    named.push_back(std::move(g));
  }
  // Groups appear in order of their lowest feature; ungrouped features are
  // singletons.
  std::vector<int> owner(kNumFeatures, -1);
  for (std::size_t g = 0; g < named.size(); ++g) {
    for (std::size_t f : named[g].features) {
      if (owner[f] >= 0) {
        raise(ErrorCode::kConfig,
              fmt::format("feature '{}' is in more than one group", kFeatureNames[f]));
      }
      owner[f] = static_cast<int>(g);
    }
  }
  FeatureGrouping out;
  std::vector<bool> placed(named.size(), false);
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    if (owner[f] < 0) {
      out.groups.push_back({std::string(kFeatureNames[f]), {f}});
    } else if (!placed[static_cast<std::size_t>(owner[f])]) {
      placed[static_cast<std::size_t>(owner[f])] = true;
      out.groups.push_back(named[static_cast<std::size_t>(owner[f])]);
    }
  }
  out.validate();
  return out;
}

void FeatureGrouping::validate() const {
  std::vector<int> seen(kNumFeatures, 0);
  for (const auto& g : groups) {
    if (g.features.empty()) raise(ErrorCode::kConfig, fmt::format("group '{}' is empty", g.name));
    for (std::size_t f : g.features) {
      if (f >= kNumFeatures) raise(ErrorCode::kConfig, fmt::format("feature index {} out of range", f));
      ++seen[f];
    }
  }
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    if (seen[f] != 1) {
      raise(ErrorCode::kConfig, fmt::format("feature '{}' appears in {} groups", kFeatureNames[f], seen[f]));
    }
  }
}

// ---- Shapley ---------------------------------------------------------------

namespace {

void apply_group(FeatureVector& p, const FeatureVector& src, const FeatureGroup& g) {
  for (std::size_t f : g.features) p[f] = src[f];
}

ShapResult exact_shapley(const ValueFn& f, const FeatureVector& x, const FeatureVector& bg,
                         const FeatureGrouping& grouping) {
  const std::size_t g = grouping.size();
  const std::size_t n_masks = std::size_t{1} << g;
  std::vector<FeatureVector> profiles(n_masks, bg);
  for (std::size_t m = 0; m < n_masks; ++m) {
    for (std::size_t k = 0; k < g; ++k) {
      if (m & (std::size_t{1} << k)) apply_group(profiles[m], x, grouping.groups[k]);
    }
  }
  const std::vector<double> v = f(profiles);
  // weight(s) = s! (g - s - 1)! / g!
  std::vector<double> weight(g);
  for (std::size_t s = 0; s < g; ++s) {
    double w = 1.0 / static_cast<double>(g);
    for (std::size_t i = 1; i <= s; ++i) {
      w *= static_cast<double>(i) / static_cast<double>(g - s - 1 + i);
    }
    weight[s] = w;
  }
  ShapResult r;
  r.exact = true;
  r.phi.assign(g, 0.0);
  for (std::size_t m = 0; m < n_masks; ++m) {
    const auto s = static_cast<std::size_t>(std::popcount(m));
    for (std::size_t k = 0; k < g; ++k) {
      const std::size_t bit = std::size_t{1} << k;
      if (m & bit) continue;
      r.phi[k] += weight[s] * (v[m | bit] - v[m]);
    }
  }
  r.base_value = v[0];
  r.prediction = v[n_masks - 1];
  return r;
}

ShapResult sampled_shapley(const ValueFn& f, const FeatureVector& x, const FeatureVector& bg,
                           const FeatureGrouping& grouping, int n_perm, std::uint64_t seed) {
  const std::size_t g = grouping.size();
  nn::Rng rng(nn::mix_seed(seed, 0x7368617079ULL));
  std::vector<long double> acc(g, 0.0L);
  constexpr int kChunk = 64;
  std::vector<std::size_t> order(g);
  std::vector<std::vector<std::size_t>> orders;
  std::vector<FeatureVector> profiles;
  for (int done = 0; done < n_perm;) {
    const int take = std::min(kChunk, n_perm - done);
    orders.clear();
    profiles.clear();
    for (int p = 0; p < take; ++p) {
      std::iota(order.begin(), order.end(), 0);
      nn::shuffle(order, rng);
      FeatureVector cur = bg;
      profiles.push_back(cur);
      for (std::size_t k : order) {
        apply_group(cur, x, grouping.groups[k]);
        profiles.push_back(cur);
      }
      orders.push_back(order);
    }
    const std::vector<double> v = f(profiles);
    for (int p = 0; p < take; ++p) {
      const std::size_t base = static_cast<std::size_t>(p) * (g + 1);
      for (std::size_t i = 0; i < g; ++i) {
        acc[orders[static_cast<std::size_t>(p)][i]] += v[base + i + 1] - v[base + i];
      }
    }
    done += take;
  }
  ShapResult r;
  r.phi.resize(g);
  for (std::size_t k = 0; k < g; ++k) {
    r.phi[k] = static_cast<double>(acc[k] / static_cast<long double>(n_perm));
  }
  const std::vector<FeatureVector> ends = {bg, x};
  const auto v = f(ends);
  r.base_value = v[0];
  r.prediction = v[1];
  r.n_permutations = n_perm;
  r.seed = seed;
  return r;
}

}  // namespace

ShapResult shapley_values(const ValueFn& f, const FeatureVector& instance,
                          const FeatureVector& background, const FeatureGrouping& grouping,
                          const ShapOptions& opt) {
  grouping.validate();
  const bool exact = opt.mode == ShapMode::kExact ||
                     (opt.mode == ShapMode::kAuto && grouping.size() <= kMaxExactGroups);
  if (exact) {
    if (grouping.size() > 20) {
      raise(ErrorCode::kConfig,
            fmt::format("exact enumeration over {} groups is not supported", grouping.size()));
    }
    return exact_shapley(f, instance, background, grouping);
  }
  if (opt.n_permutations < 1) raise(ErrorCode::kConfig, "n_permutations must be >= 1");
  return sampled_shapley(f, instance, background, grouping, opt.n_permutations, opt.seed);
}

std::vector<ShapSummary::GroupRank> rank_groups(const std::vector<std::string>& names,
                                                const std::vector<std::vector<double>>& phi) {
  std::vector<ShapSummary::GroupRank> out(names.size());
  for (std::size_t g = 0; g < names.size(); ++g) {
    double s = 0.0;
    for (const auto& row : phi) s += std::abs(row[g]);
    out[g].group = names[g];
    out[g].mean_abs_phi = phi.empty() ? 0.0 : s / static_cast<double>(phi.size());
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.mean_abs_phi > b.mean_abs_phi; });
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].rank = (i > 0 && out[i].mean_abs_phi == out[i - 1].mean_abs_phi) ? out[i - 1].rank : i + 1;
  }
  return out;
}

ShapSummary shap_summary(const ValueFn& f, std::span<const FeatureVector> rows,
                         const FeatureVector& background, const FeatureGrouping& grouping,
                         const ShapOptions& opt) {
  if (rows.empty()) raise(ErrorCode::kConfig, "shap summary needs at least one row");
  ShapSummary s;
  for (const auto& g : grouping.groups) s.group_names.push_back(g.name);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    ShapOptions o = opt;
    o.seed = nn::mix_seed(opt.seed, r);
    const ShapResult res = shapley_values(f, rows[r], background, grouping, o);
    s.exact = res.exact;
    s.phi.push_back(res.phi);
    s.base_values.push_back(res.base_value);
    std::vector<double> vals;
    for (const auto& g : grouping.groups) {
      double v = 0.0;
      for (std::size_t j : g.features) v += rows[r][j];
      vals.push_back(v);
    }
    s.value.push_back(std::move(vals));
  }
  s.ranking = rank_groups(s.group_names, s.phi);
  return s;
}

std::string shap_summary_csv(const ShapSummary& s) {
  std::string out = "group,rank,mean_abs_phi\n";
  for (const auto& r : s.ranking) {
    out += fmt::format("{},{},{}\n", csv::escape(r.group), r.rank, csv::format_double(r.mean_abs_phi));
  }
  return out;
}

std::string shap_rows_csv(const ShapSummary& s) {
  std::string out = "row,group,phi,feature_value\n";
  for (std::size_t r = 0; r < s.phi.size(); ++r) {
    for (std::size_t g = 0; g < s.group_names.size(); ++g) {
      out += fmt::format("{},{},{},{}\n", r, csv::escape(s.group_names[g]),
                         csv::format_double(s.phi[r][g]), csv::format_double(s.value[r][g]));
    }
  }
  return out;
}

// ---- partial dependence ----------------------------------------------------

namespace {

void check_grid(std::span<const double> grid) {
  if (grid.empty()) raise(ErrorCode::kConfig, "grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i])) raise(ErrorCode::kConfig, "grid has a non-finite value");
    if (i > 0 && !(grid[i] > grid[i - 1])) {
      raise(ErrorCode::kConfig, "grid must be strictly increasing");
    }
  }
}

}  // namespace

std::vector<double> make_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) raise(ErrorCode::kConfig, "invalid grid bounds");
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo + static_cast<double>(i) * step;
  return g;
}

std::vector<double> default_drive_grid() { return make_grid(0.0, 70.0, 0.5); }

PdpCurve pdp_curve(const ValueFn& f, std::size_t feature, std::span<const double> grid,
                   PdpMode mode, const FeatureVector& means, std::span<const FeatureVector> rows) {
  if (feature >= kNumFeatures) raise(ErrorCode::kConfig, fmt::format("feature index {} out of range", feature));
  check_grid(grid);
  PdpCurve c;
  c.feature = feature;
  c.grid.assign(grid.begin(), grid.end());
  c.scenario = std::string(kFeatureNames[feature]);
  if (mode == PdpMode::kAtMeans) {
    c.background = "other features at training means";
    std::vector<FeatureVector> profiles(grid.size(), means);
    for (std::size_t i = 0; i < grid.size(); ++i) profiles[i][feature] = grid[i];
    c.values = f(profiles);
  } else {
    if (rows.empty()) raise(ErrorCode::kConfig, "averaged partial dependence needs rows");
    c.background = fmt::format("averaged over {} rows", rows.size());
    std::vector<FeatureVector> profiles(rows.begin(), rows.end());
    for (double t : grid) {
      for (auto& p : profiles) p[feature] = t;
      const auto v = f(profiles);
      double s = 0.0;
      for (double x : v) s += x;
      c.values.push_back(s / static_cast<double>(v.size()));
    }
  }
  return c;
}

std::vector<PdpCurve> decay_scenarios(const ValueFn& f, const FeatureStats& stats,
                                      std::size_t attribute, std::span<const double> drive_grid) {
  if (attribute >= kNumFeatures || !is_hospital_feature(attribute)) {
    raise(ErrorCode::kScope,
          fmt::format("'{}' is not a hospital-side feature",
                      attribute < kNumFeatures ? kFeatureNames[attribute] : "?"));
  }
  if (stats.size() != kNumFeatures) raise(ErrorCode::kShape, "feature statistics have the wrong width");
  FeatureVector means{};
  std::copy(stats.mean.begin(), stats.mean.end(), means.begin());
  const std::pair<const char*, double> levels[] = {
      {"min", stats.min[attribute]}, {"mean", stats.mean[attribute]}, {"max", stats.max[attribute]}};
  std::vector<PdpCurve> out;
  for (const auto& [label, value] : levels) {
    FeatureVector base = means;
    base[attribute] = value;
    PdpCurve c = pdp_curve(f, kDriveTimeIndex, drive_grid, PdpMode::kAtMeans, base);
    c.scenario = fmt::format("{}={}", kFeatureNames[attribute], label);
    c.background = fmt::format("{} fixed at {}; other features at training means",
                               kFeatureNames[attribute], csv::format_double(value));
    out.push_back(std::move(c));
  }
  return out;
}

std::string pdp_csv(std::span<const PdpCurve> curves) {
  std::string out = "scenario,grid_value,prediction\n";
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.grid.size(); ++i) {
      out += fmt::format("{},{},{}\n", csv::escape(c.scenario), csv::format_double(c.grid[i]),
                         csv::format_double(c.values[i]));
    }
  }
  return out;
}

std::vector<PdpCurve> read_pdp_csv(const std::string& text) {
  const csv::Table t = csv::parse(text);
  auto col = [&](std::string_view name) -> int {
    for (std::size_t i = 0; i < t.header.size(); ++i) {
      if (t.header[i] == name) return static_cast<int>(i);
    }
    return -1;
  };
  const int cs = col("scenario");
  const int cg = col("grid_value");
  const int cp = col("prediction");
  if (cg < 0 || cp < 0) raise(ErrorCode::kSchema, "curve file needs grid_value and prediction columns");
  std::vector<PdpCurve> out;
  std::map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (row.size() != t.header.size()) {
      raise(ErrorCode::kRow, fmt::format("line {}: expected {} cells", t.lines[r], t.header.size()));
    }
    const std::string name = cs >= 0 ? row[static_cast<std::size_t>(cs)] : "curve";
    const auto g = csv::parse_double(row[static_cast<std::size_t>(cg)]);
    const auto p = csv::parse_double(row[static_cast<std::size_t>(cp)]);
    if (!g || !p) raise(ErrorCode::kRow, fmt::format("line {}: unparsable number", t.lines[r]));
    auto [it, fresh] = index.emplace(name, out.size());
    if (fresh) {
      PdpCurve c;
      c.scenario = name;
      out.push_back(std::move(c));
    }
    out[it->second].grid.push_back(*g);
    out[it->second].values.push_back(*p);
  }
  for (const auto& c : out) check_grid(c.grid);
  return out;
}

// ---- inflection ------------------------------------------------------------

InflectionReport find_inflection(const PdpCurve& a, const PdpCurve& b) {
  if (a.grid != b.grid || a.values.size() != a.grid.size() || b.values.size() != b.grid.size()) {
    raise(ErrorCode::kGrid, "curves do not share the same grid");
  }
  const std::size_t n = a.grid.size();
  std::vector<double> d(n);
  bool all_zero = true;
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = a.values[i] - b.values[i];
    if (!std::isfinite(d[i])) raise(ErrorCode::kGrid, "curve values must be finite");
    all_zero = all_zero && d[i] == 0.0;
  }
  InflectionReport r;
  if (all_zero) {
    r.degenerate = true;
    return r;
  }
  auto sgn = [](double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); };
  std::size_t i = 0;
  while (i < n && d[i] == 0.0) ++i;  // leading zeros carry no sign change
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && d[j] == 0.0) ++j;
    if (j >= n) break;
    if (sgn(d[i]) != sgn(d[j])) {
      if (j == i + 1) {
        const double w = d[i] / (d[i] - d[j]);
        r.crossings.push_back({a.grid[i] + w * (a.grid[j] - a.grid[i]), sgn(d[j])});
      } else {
        r.crossings.push_back({a.grid[i + 1], sgn(d[j])});
      }
    }
    i = j;
  }
  return r;
}

std::string format_abscissa(double t) {
  std::string s = fmt::format("{}", t);
  if (std::isfinite(t) && s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

nlohmann::json inflection_to_json(const InflectionReport& r) {
  nlohmann::json c = nlohmann::json::array();
  for (const auto& x : r.crossings) c.push_back({{"t", x.t}, {"sign", x.sign}});
  return {{"crossings", c}, {"degenerate", r.degenerate}};
}

}  // namespace odflow
