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

#include "odflow/run_config.hpp"

#include <fmt/format.h>

#include "odflow/csv.hpp"
#include "odflow/error.hpp"

namespace odflow {

namespace {

template <typename T>
T get_at(const nlohmann::json& v, const std::string& path) {
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    raise(ErrorCode::kConfig, fmt::format("{}: wrong value type", path));
  }
}

void require_object(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) raise(ErrorCode::kConfig, fmt::format("{}: expected an object", path));
}

DataConfig data_from_json(const nlohmann::json& j) {
  require_object(j, "data");
  DataConfig d;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string path = "data." + it.key();
    if (it.key() == "dir") d.dir = get_at<std::string>(it.value(), path);
    else if (it.key() == "first_year") d.period.first_year = get_at<int>(it.value(), path);
    else if (it.key() == "n_years") d.period.n_years = get_at<int>(it.value(), path);
    else if (it.key() == "exclude_origins") d.exclude_origins = get_at<std::vector<std::string>>(it.value(), path);
    else raise(ErrorCode::kConfig, fmt::format("{}: unknown key", path));
  }
  return d;
}

InterpretConfig interpret_from_json(const nlohmann::json& j) {
  require_object(j, "interpret");
  InterpretConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string path = "interpret." + it.key();
    const auto& v = it.value();
    const std::string& k = it.key();
    if (k == "grouping") {
      c.grouping = v;
      if (!v.is_null()) {
        try {
          FeatureGrouping::from_json(v);
        } catch (const Error& e) {
          raise(ErrorCode::kConfig, fmt::format("{}: {}", path, e.what()));
        }
      }
    } else if (k == "shap_mode") {
      const auto s = get_at<std::string>(v, path);
      if (s == "auto") c.shap_mode = ShapMode::kAuto;
      else if (s == "exact") c.shap_mode = ShapMode::kExact;
      else if (s == "sampling") c.shap_mode = ShapMode::kSampling;
      else raise(ErrorCode::kConfig, fmt::format("{}: unknown mode '{}'", path, s));
    } else if (k == "n_permutations") {
      c.n_permutations = get_at<int>(v, path);
    } else if (k == "max_rows") {
      c.max_rows = get_at<std::size_t>(v, path);
    } else if (k == "feature") {
      c.feature = get_at<std::string>(v, path);
    } else if (k == "attribute") {
      c.attribute = get_at<std::string>(v, path);
    } else if (k == "pdp_mode") {
      const auto s = get_at<std::string>(v, path);
      if (s == "at_means") c.pdp_mode = PdpMode::kAtMeans;
      else if (s == "averaged") c.pdp_mode = PdpMode::kAveraged;
      else raise(ErrorCode::kConfig, fmt::format("{}: unknown mode '{}'", path, s));
    } else if (k == "grid") {
      require_object(v, path);
      for (auto g = v.begin(); g != v.end(); ++g) {
        const std::string gp = path + "." + g.key();
        if (g.key() == "lo") c.grid_lo = get_at<double>(g.value(), gp);
        else if (g.key() == "hi") c.grid_hi = get_at<double>(g.value(), gp);
        else if (g.key() == "step") c.grid_step = get_at<double>(g.value(), gp);
        else raise(ErrorCode::kConfig, fmt::format("{}: unknown key", gp));
      }
    } else {
      raise(ErrorCode::kConfig, fmt::format("{}: unknown key", path));
    }
  }
  return c;
}

std::string shap_mode_name(ShapMode m) {
  switch (m) {
    case ShapMode::kAuto: return "auto";
    case ShapMode::kExact: return "exact";
    case ShapMode::kSampling: return "sampling";
  }
  return "auto";
}

}  // namespace

void RunConfig::apply_seed(std::uint64_t s) {
  seed = s;
  set_seed(model, s);
  protocol.base_seed = s;
  synth.seed = s;
}

FeatureGrouping RunConfig::grouping() const {
  return interpret.grouping.is_null() ? FeatureGrouping::all_beds()
                                      : FeatureGrouping::from_json(interpret.grouping);
}

IngestOptions RunConfig::ingest_options() const {
  IngestOptions o;
  o.period = data.period;
  o.exclude_origins = data.exclude_origins;
  return o;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  require_object(j, "config");
  RunConfig c;
  bool seeded = false;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const auto& v = it.value();
    if (k == "data") c.data = data_from_json(v);
    else if (k == "model") c.model = config_from_json(v);
    else if (k == "protocol") c.protocol = protocol_from_json(v, "protocol");
    else if (k == "interpret") c.interpret = interpret_from_json(v);
    else if (k == "synth") c.synth = synth_config_from_json(v, "synth");
    else if (k == "seed") {
      c.seed = get_at<std::uint64_t>(v, "seed");
      seeded = true;
    } else raise(ErrorCode::kConfig, fmt::format("{}: unknown key", k));
  }
  if (seeded) c.apply_seed(c.seed);
  return c;
}

nlohmann::json run_config_to_json(const RunConfig& c) {
  const auto& i = c.interpret;
  return {{"seed", c.seed},
          {"data",
           {{"dir", c.data.dir},
            {"first_year", c.data.period.first_year},
            {"n_years", c.data.period.n_years},
            {"exclude_origins", c.data.exclude_origins}}},
          {"model", config_to_json(c.model)},
          {"protocol", protocol_to_json(c.protocol)},
          {"interpret",
           {{"grouping", i.grouping},
            {"shap_mode", shap_mode_name(i.shap_mode)},
            {"n_permutations", i.n_permutations},
            {"max_rows", i.max_rows},
            {"feature", i.feature},
            {"attribute", i.attribute},
            {"pdp_mode", i.pdp_mode == PdpMode::kAtMeans ? "at_means" : "averaged"},
            {"grid", {{"lo", i.grid_lo}, {"hi", i.grid_hi}, {"step", i.grid_step}}}}},
          {"synth", synth_config_to_json(c.synth)}};
}

RunConfig load_run_config(const std::filesystem::path& path) {
  const std::string text = csv::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::kConfig, fmt::format("{}: not valid JSON ({})", path.string(), e.what()));
  }
  return run_config_from_json(j);
}

}  // namespace odflow
