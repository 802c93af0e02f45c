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

#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cli.hpp"
#include "odflow/error.hpp"
#include "odflow/evaluation.hpp"
#include "odflow/ingest.hpp"
#include "odflow/interpret.hpp"
#include "odflow/model.hpp"
#include "odflow/synth.hpp"

namespace py = pybind11;
using namespace odflow;

namespace {

using Json = nlohmann::json;

Json parse(const std::string& text) { return text.empty() ? Json::object() : Json::parse(text); }

struct PyDataset {
  ODDataset dataset;
  std::size_t flows_before_exclusion = 0;
  std::vector<std::string> warnings;
};

struct PyModel {
  ModelArtifact artifact;
};

std::vector<FeatureRow> rows_for(const ModelArtifact& art, const ODDataset& ds) {
  return art.simplex() ? assemble_candidates(ds) : assemble_features(ds);
}

}  // namespace

PYBIND11_MODULE(_odflow, m) {
  m.doc() = "Hospital visitation flow models";
  m.attr("__version__") = ODFLOW_VERSION;

  static py::exception<Error> error(m, "OdflowError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error.ptr(), fmt::format("{}: {}", error_code_name(e.code()), e.what()).c_str());
    }
  });

  m.def("feature_names", [] { return std::vector<std::string>(kFeatureNames.begin(), kFeatureNames.end()); });
  m.def("nrmse", [](std::vector<double> y, std::vector<double> p) { return nrmse(y, p); });
  m.def("smape", [](std::vector<double> y, std::vector<double> p) { return smape(y, p); });
  m.def("cpc", [](std::vector<double> y, std::vector<double> p) { return cpc(y, p); });

  py::class_<PyDataset>(m, "Dataset")
      .def_property_readonly("n_zones", [](const PyDataset& d) { return d.dataset.zones().size(); })
      .def_property_readonly("n_hospitals", [](const PyDataset& d) { return d.dataset.hospitals().size(); })
      .def_property_readonly("n_flows", [](const PyDataset& d) { return d.dataset.flows().size(); })
      .def_readonly("flows_before_exclusion", &PyDataset::flows_before_exclusion)
      .def_readonly("warnings", &PyDataset::warnings);

  m.def(
      "ingest",
      [](const std::string& dir, const std::vector<std::string>& exclude) {
        IngestOptions o;
        o.exclude_origins = exclude;
        auto r = ingest(DataPaths::in_directory(dir), o);
        return PyDataset{std::move(r.dataset), r.flows_before_exclusion, r.report.warnings};
      },
      py::arg("data_dir"), py::arg("exclude_origins") = std::vector<std::string>{});

  m.def(
      "synth_city",
      [](const std::string& config_json, const std::string& out_dir) {
        const SynthConfig c = synth_config_from_json(parse(config_json));
        const SynthCity city = generate_city(c);
        std::filesystem::create_directories(out_dir);
        write_city(city, c, out_dir);
        const auto& a = city.truth.achievable;
        return Json{{"nrmse", a.nrmse}, {"smape", a.smape}, {"cpc", a.cpc}}.dump();
      },
      py::arg("config_json"), py::arg("out_dir"));

  py::class_<PyModel>(m, "Model")
      .def_property_readonly("family",
                             [](const PyModel& p) { return std::string(family_name(p.artifact.family)); })
      .def("to_json", [](const PyModel& p) { return artifact_to_json(p.artifact).dump(); })
      .def_static("from_json", [](const std::string& s) { return PyModel{artifact_from_json(Json::parse(s))}; })
      .def("predict", [](const PyModel& p, const PyDataset& d) {
        const auto rows = rows_for(p.artifact, d.dataset);
        const auto pred = predict(p.artifact, rows);
        std::vector<std::tuple<std::string, std::string, double>> out;
        for (std::size_t i = 0; i < rows.size(); ++i) out.emplace_back(rows[i].origin_zone_id, rows[i].hospital_id, pred[i]);
        return out;
      });

  m.def(
      "fit",
      [](const std::string& config_json, const PyDataset& d) {
        const ModelConfig c = config_from_json(parse(config_json));
        const auto rows = uses_choice_sets(c) ? assemble_candidates(d.dataset) : assemble_features(d.dataset);
        return PyModel{fit_model(c, rows)};
      },
      py::arg("config_json"), py::arg("dataset"));

  m.def(
      "cross_validate",
      [](const std::string& config_json, const PyDataset& d, const std::string& protocol_json) {
        const ModelConfig c = config_from_json(parse(config_json));
        return report_to_json(cross_validate(c, d.dataset, protocol_from_json(parse(protocol_json)))).dump();
      },
      py::arg("config_json"), py::arg("dataset"), py::arg("protocol_json") = "");

  m.def(
      "find_inflection",
      [](std::vector<double> grid, std::vector<double> a, std::vector<double> b) {
        PdpCurve ca, cb;
        ca.grid = cb.grid = std::move(grid);
        ca.values = std::move(a);
        cb.values = std::move(b);
        return inflection_to_json(find_inflection(ca, cb)).dump();
      },
      py::arg("grid"), py::arg("a"), py::arg("b"));

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "odflow");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
