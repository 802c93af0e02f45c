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

#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "odflow/csv.hpp"
#include "odflow/error.hpp"
#include "odflow/evaluation.hpp"
#include "odflow/features.hpp"
#include "odflow/hgnn.hpp"
#include "odflow/ingest.hpp"
#include "odflow/interpret.hpp"
#include "odflow/model.hpp"
#include "odflow/nn.hpp"
#include "odflow/random.hpp"
#include "odflow/run_config.hpp"
#include "odflow/synth.hpp"

namespace odflow {

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out = "out";
  std::string data;
};

RunConfig resolve(const CommonArgs& a) {
  RunConfig c = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  c.apply_seed(a.seed_given ? a.seed : c.seed);
  if (!a.data.empty()) c.data.dir = a.data;
  return c;
}

std::string canonical_text(const fs::path& p) { return fs::weakly_canonical(p).string(); }

/// Files written by one subcommand, echoed into manifest.json.
class OutputSet {
 public:
  OutputSet(fs::path dir, std::string command) : dir_(std::move(dir)), command_(std::move(command)) {
    fs::create_directories(dir_);
  }

  void add_input(const std::string& role, const fs::path& path) {
    inputs_[role] = path.string();
    protected_.push_back(canonical_text(path));
  }

  void write(const std::string& name, const std::string& contents) {
    csv::write_file(checked(name), contents);
    record(name);
  }

  /// Output path for `name`; throws if it names an input of this run.
  fs::path checked(const std::string& name) const {
    const fs::path p = dir_ / name;
    if (std::find(protected_.begin(), protected_.end(), canonical_text(p)) != protected_.end()) {
      raise(ErrorCode::kIo, fmt::format("refusing to overwrite input file '{}'", p.string()));
    }
    return p;
  }

  /// Registers a file already written into the output directory.
  void record(const std::string& name) {
    outputs_.push_back({{"file", name}, {"bytes", fs::file_size(dir_ / name)}});
  }

  void finish(const RunConfig& config) {
    const nlohmann::json resolved = run_config_to_json(config);
    write("resolved_config.json", resolved.dump(2) + "\n");
    const nlohmann::json manifest = {{"tool", "odflow"},
                                     {"version", ODFLOW_VERSION},
                                     {"command", command_},
                                     {"seed", config.seed},
                                     {"config", resolved},
                                     {"inputs", inputs_},
                                     {"outputs", outputs_}};
    csv::write_file(checked("manifest.json"), manifest.dump(2) + "\n");
  }

  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::string command_;
  nlohmann::json inputs_ = nlohmann::json::object();
  nlohmann::json outputs_ = nlohmann::json::array();
  std::vector<std::string> protected_;
};

OutputSet open_outputs(const CommonArgs& a, const std::string& command) {
  OutputSet o(a.out, command);
  if (!a.config.empty()) o.add_input("config", a.config);
  return o;
}

IngestResult load_data(const RunConfig& c, OutputSet* outputs) {
  if (c.data.dir.empty()) {
    raise(ErrorCode::kConfig, "data.dir: no data directory given (use --data or data.dir)");
  }
  const DataPaths paths = DataPaths::in_directory(c.data.dir);
  if (outputs) {
    outputs->add_input("zones", paths.zones);
    outputs->add_input("hospitals", paths.hospitals);
    outputs->add_input("flows", paths.flows);
    outputs->add_input("drive_time", paths.drive_time);
  }
  return ingest(paths, c.ingest_options());
}

std::vector<FeatureRow> model_rows(const ODDataset& ds, bool choice_sets) {
  return choice_sets ? assemble_candidates(ds) : assemble_features(ds);
}

FeatureVector to_profile(const std::vector<double>& v) {
  FeatureVector p{};
  std::copy_n(v.begin(), kNumFeatures, p.begin());
  return p;
}

// ---- subcommands -----------------------------------------------------------

int cmd_synth(const CommonArgs& a, const std::string& fixture, std::ostream& out) {
  const RunConfig c = resolve(a);
  OutputSet o = open_outputs(a, "synth");
  if (fixture == "county") {
    const CountyFixture f = county_fixture(c.seed);
    write_fixture(f, o.dir());
    for (auto k : {TableKind::kZones, TableKind::kHospitals, TableKind::kFlows, TableKind::kDriveTime}) {
      o.record(table_file_name(k));
    }
    out << fmt::format("county fixture: {} zones, {} hospitals, {} visit records\n", f.zones.size(),
                       f.hospitals.size(), f.records.size());
  } else {
    const SynthCity city = generate_city(c.synth);
    write_city(city, c.synth, o.dir());
    for (auto k : {TableKind::kZones, TableKind::kHospitals, TableKind::kFlows, TableKind::kDriveTime}) {
      o.record(table_file_name(k));
    }
    o.record("truth.csv");
    o.record("oracle.json");
    const auto& m = city.truth.achievable;
    out << fmt::format("city: {} zones, {} hospitals, {} flows\n", city.dataset.zones().size(),
                       city.dataset.hospitals().size(), city.dataset.flows().size());
    out << fmt::format("oracle: NRMSE {:.4f}  SMAPE {:.4f}  CPC {:.4f}\n", m.nrmse, m.smape, m.cpc);
  }
  o.finish(c);
  return 0;
}

int cmd_validate(const CommonArgs& a, std::ostream& out) {
  const RunConfig c = resolve(a);
  OutputSet o = open_outputs(a, "validate");
  const IngestResult r = load_data(c, &o);
  const ODDataset& ds = r.dataset;
  const nlohmann::json j = {{"ok", r.report.ok()},
                            {"errors", r.report.errors},
                            {"warnings", r.report.warnings},
                            {"row_counts", r.report.row_counts},
                            {"zones", ds.zones().size()},
                            {"hospitals", ds.hospitals().size()},
                            {"flows_before_exclusion", r.flows_before_exclusion},
                            {"removed_flows", r.removed_flows},
                            {"flows", ds.flows().size()}};
  o.write("validation.json", j.dump(2) + "\n");
  o.finish(c);
  out << fmt::format("zones {}  hospitals {}  flows {} -> {} after exclusion\n", ds.zones().size(),
                     ds.hospitals().size(), r.flows_before_exclusion, ds.flows().size());
  for (const auto& w : r.report.warnings) out << "warning: " << w << "\n";
  return r.report.ok() ? 0 : 1;
}

int cmd_train(const CommonArgs& a, std::ostream& out) {
  const RunConfig c = resolve(a);
  OutputSet o = open_outputs(a, "train");
  const IngestResult r = load_data(c, &o);
  const auto rows = model_rows(r.dataset, uses_choice_sets(c.model));
  const ModelArtifact art = fit_model(c.model, rows);
  o.write("model.json", artifact_to_json(art).dump(1) + "\n");
  if (!art.loss_curve.empty()) o.write("loss_curve.csv", loss_curve_csv(art.loss_curve));
  if (art.family == Family::kHgnn) {
    const HeteroGraph g = build_graph(std::span<const FeatureRow>(rows));
    o.write("graph_nodes.csv", graph_nodes_csv(g));
    o.write("graph_edges.csv", graph_edges_csv(g));
  }
  o.finish(c);
  out << fmt::format("trained {} on {} rows\n", family_name(art.family), rows.size());
  return 0;
}

int cmd_evaluate(const CommonArgs& a, std::ostream& out) {
  const RunConfig c = resolve(a);
  OutputSet o = open_outputs(a, "evaluate");
  const IngestResult r = load_data(c, &o);
  const EvalReport rep = cross_validate(c.model, r.dataset, c.protocol);
  o.write("eval_report.json", report_to_json(rep).dump(2) + "\n");
  o.write("eval_cells.csv", report_csv(rep));
  o.finish(c);
  out << report_summary(rep);
  return rep.n_failed == rep.cells.size() ? 1 : 0;
}

int cmd_predict(const CommonArgs& a, const std::string& model_path, std::ostream& out) {
  const RunConfig c = resolve(a);
  OutputSet o = open_outputs(a, "predict");
  o.add_input("model", model_path);
  const ModelArtifact art = load_artifact(model_path);
  const IngestResult r = load_data(c, &o);
  const auto rows = model_rows(r.dataset, art.simplex());
  const auto pred = predict(art, rows);
  std::string csv = "origin_zone_id,hospital_id,target_share,prediction\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    csv += fmt::format("{},{},{},{}\n", rows[i].origin_zone_id, rows[i].hospital_id,
                       rows[i].target_share, pred[i]);
  }
  o.write("predictions.csv", csv);
  o.finish(c);
  out << fmt::format("scored {} rows\n", rows.size());
  return 0;
}

int cmd_explain(const CommonArgs& a, const std::string& model_path, std::ostream& out) {
  const RunConfig c = resolve(a);
  OutputSet o = open_outputs(a, "explain");
  o.add_input("model", model_path);
  const ModelArtifact art = load_artifact(model_path);
  const IngestResult r = load_data(c, &o);
  const auto rows = assemble_features(r.dataset);

  // Seeded subset of observed flows, kept in flow order.
  std::vector<std::size_t> idx(rows.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (idx.size() > c.interpret.max_rows) {
    std::mt19937_64 rng(nn::mix_seed(c.seed, 0x6578706c61696e));
    for (std::size_t i = 0; i < c.interpret.max_rows; ++i) {
      std::swap(idx[i], idx[i + uniform_index(rng, idx.size() - i)]);
    }
    idx.resize(c.interpret.max_rows);
    std::sort(idx.begin(), idx.end());
  }
  std::vector<FeatureVector> profiles;
  profiles.reserve(idx.size());
  for (std::size_t i : idx) profiles.push_back(rows[i].features);

  ShapOptions opt;
  opt.mode = c.interpret.shap_mode;
  opt.n_permutations = c.interpret.n_permutations;
  opt.seed = c.seed;
  const ShapSummary s = shap_summary(artifact_value_fn(art), profiles, to_profile(art.stats.mean),
                                     c.grouping(), opt);
  o.write("shap_summary.csv", shap_summary_csv(s));
  o.write("shap_rows.csv", shap_rows_csv(s));
  o.finish(c);
  out << fmt::format("{} rows, {} groups ({})\n", profiles.size(), s.group_names.size(),
                     s.exact ? "exact" : "sampled");
  for (const auto& g : s.ranking) {
    out << fmt::format("{:>3}  {:<26} {:.6g}\n", g.rank, g.group, g.mean_abs_phi);
  }
  return 0;
}

void print_crossings(const InflectionReport& rep, std::ostream& out) {
  if (rep.degenerate) {
    out << "degenerate: curves coincide\n";
  } else if (rep.crossings.empty()) {
    out << "no crossing\n";
  }
  for (const auto& x : rep.crossings) out << format_abscissa(x.t) << "\n";
}

int cmd_pdp(const CommonArgs& a, const std::string& model_path, std::string feature,
            std::string attribute, bool scenarios, std::ostream& out) {
  RunConfig c = resolve(a);
  if (!feature.empty()) c.interpret.feature = feature;
  if (!attribute.empty()) {
    c.interpret.attribute = attribute;
    scenarios = true;
  }
  OutputSet o = open_outputs(a, "pdp");
  o.add_input("model", model_path);
  const ModelArtifact art = load_artifact(model_path);
  const ValueFn f = artifact_value_fn(art);
  const auto grid = make_grid(c.interpret.grid_lo, c.interpret.grid_hi, c.interpret.grid_step);

  std::vector<PdpCurve> curves;
  if (scenarios) {
    curves = decay_scenarios(f, art.stats, feature_index(c.interpret.attribute), grid);
  } else {
    std::vector<FeatureVector> background;
    if (c.interpret.pdp_mode == PdpMode::kAveraged) {
      const IngestResult r = load_data(c, &o);
      for (const auto& row : assemble_features(r.dataset)) background.push_back(row.features);
    }
    curves.push_back(pdp_curve(f, feature_index(c.interpret.feature), grid, c.interpret.pdp_mode,
                               to_profile(art.stats.mean), background));
  }
  o.write("pdp.csv", pdp_csv(curves));
  if (scenarios) {
    const InflectionReport rep = find_inflection(curves.front(), curves.back());
    o.write("inflections.json", inflection_to_json(rep).dump(2) + "\n");
    out << fmt::format("{} vs {}: ", curves.front().scenario, curves.back().scenario);
    print_crossings(rep, out);
  } else {
    out << fmt::format("{} points over {}\n", grid.size(), c.interpret.feature);
  }
  o.finish(c);
  return 0;
}

PdpCurve pick_curve(const std::string& path, const std::string& scenario, const char* flag) {
  const auto curves = read_pdp_csv(csv::read_file(path));
  if (!scenario.empty()) {
    for (const auto& cv : curves) {
      if (cv.scenario == scenario) return cv;
    }
    raise(ErrorCode::kConfig, fmt::format("{}: no scenario '{}'", path, scenario));
  }
  if (curves.size() != 1) {
    raise(ErrorCode::kConfig,
          fmt::format("{}: holds {} curves; pick one with {}", path, curves.size(), flag));
  }
  return curves.front();
}

int cmd_inflect(const CommonArgs& a, bool out_given, const std::string& file_a,
                const std::string& file_b, const std::string& scen_a, const std::string& scen_b,
                std::ostream& out) {
  const PdpCurve ca = pick_curve(file_a, scen_a, "--scenario-a");
  const PdpCurve cb = pick_curve(file_b, scen_b, "--scenario-b");
  const InflectionReport rep = find_inflection(ca, cb);
  print_crossings(rep, out);
  if (out_given) {
    const RunConfig c = resolve(a);
    OutputSet o = open_outputs(a, "inflect");
    o.add_input("curve_a", file_a);
    o.add_input("curve_b", file_b);
    o.write("inflections.json", inflection_to_json(rep).dump(2) + "\n");
    o.finish(c);
  }
  return 0;
}

void add_common(CLI::App* sub, CommonArgs& a, bool with_data) {
  sub->add_option("--config", a.config, "JSON run configuration");
  sub->add_option("--seed", a.seed, "seed for every random component")->each([&a](const std::string&) {
    a.seed_given = true;
  });
  sub->add_option("--out", a.out, "output directory")->capture_default_str();
  if (with_data) sub->add_option("--data", a.data, "directory with the four input tables");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"odflow: hospital flow prediction toolkit", "odflow"};
  app.set_version_flag("--version", ODFLOW_VERSION);
  app.require_subcommand(1);

  CommonArgs common;
  std::string fixture = "city";
  std::string model_path;
  std::string feature, attribute;
  bool scenarios = false;
  std::string file_a, file_b, scen_a, scen_b;

  auto* synth = app.add_subcommand("synth", "generate a synthetic city or the county fixture");
  add_common(synth, common, false);
  synth->add_option("--fixture", fixture, "city or county")
      ->check(CLI::IsMember({"city", "county"}))
      ->capture_default_str();

  auto* validate = app.add_subcommand("validate", "ingest tables and report problems");
  add_common(validate, common, true);

  auto* train = app.add_subcommand("train", "fit one model family and write its artifact");
  add_common(train, common, true);

  auto* evaluate = app.add_subcommand("evaluate", "cross-validate a model configuration");
  add_common(evaluate, common, true);

  auto* predict_cmd = app.add_subcommand("predict", "score rows with a trained artifact");
  add_common(predict_cmd, common, true);
  predict_cmd->add_option("--model", model_path, "model.json")->required();

  auto* explain = app.add_subcommand("explain", "grouped Shapley attributions");
  add_common(explain, common, true);
  explain->add_option("--model", model_path, "model.json")->required();

  auto* pdp = app.add_subcommand("pdp", "partial dependence and decay scenarios");
  add_common(pdp, common, true);
  pdp->add_option("--model", model_path, "model.json")->required();
  pdp->add_option("--feature", feature, "feature to sweep");
  pdp->add_option("--attribute", attribute, "hospital attribute for decay scenarios");
  pdp->add_flag("--scenarios", scenarios, "decay scenarios on the configured attribute");

  auto* inflect = app.add_subcommand("inflect", "crossings of two curves");
  add_common(inflect, common, false);
  inflect->add_option("curve_a", file_a, "first curve CSV")->required();
  inflect->add_option("curve_b", file_b, "second curve CSV")->required();
  inflect->add_option("--scenario-a", scen_a, "scenario to read from the first file");
  inflect->add_option("--scenario-b", scen_b, "scenario to read from the second file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(common, fixture, out);
    if (validate->parsed()) return cmd_validate(common, out);
    if (train->parsed()) return cmd_train(common, out);
    if (evaluate->parsed()) return cmd_evaluate(common, out);
    if (predict_cmd->parsed()) return cmd_predict(common, model_path, out);
    if (explain->parsed()) return cmd_explain(common, model_path, out);
    if (pdp->parsed()) return cmd_pdp(common, model_path, feature, attribute, scenarios, out);
    if (inflect->parsed()) {
      return cmd_inflect(common, inflect->count("--out") > 0, file_a, file_b, scen_a, scen_b, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace odflow
