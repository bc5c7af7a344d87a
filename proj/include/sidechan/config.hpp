#pragma once

// Experiment configuration file: a flat JSON document that maps onto
// ExperimentConfig, custom hardware profiles and grid candidate sets.
// Unknown keys are rejected everywhere so typos cannot silently fall back
// to defaults.

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "sidechan/experiments.hpp"

namespace sidechan::config {

using json = nlohmann::json;

namespace detail {

inline void check_keys(const json& obj, const std::set<std::string>& allowed,
                       const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      throw ParseError("config: unknown key '" + key + "' in " + where);
    }
  }
}

inline hwmodel::HardwareProfile parse_profile(const json& j) {
  check_keys(j,
             {"name", "llc_bytes", "time_slope_s_per_patch",
              "time_intercept_s", "density_time_coeff_s", "llc_base",
              "llc_sensitivity", "time_noise_rel", "llc_noise_abs",
              "warm_factor"},
             "profiles[]");
  hwmodel::HardwareProfile p;
  p.name = j.at("name").get<std::string>();
  p.llc_bytes = j.at("llc_bytes").get<std::uint64_t>();
  p.time_slope_s_per_patch = j.at("time_slope_s_per_patch").get<double>();
  p.time_intercept_s = j.at("time_intercept_s").get<double>();
  p.density_time_coeff_s = j.value("density_time_coeff_s", 0.0);
  p.llc_base = j.at("llc_base").get<double>();
  p.llc_sensitivity = j.value("llc_sensitivity", 0.0);
  p.time_noise_rel = j.value("time_noise_rel", 0.0);
  p.llc_noise_abs = j.value("llc_noise_abs", 0.0);
  p.warm_factor = j.value("warm_factor", 1.0);
  return p;
}

inline json profile_json(const hwmodel::HardwareProfile& p) {
  return json{{"name", p.name},
              {"llc_bytes", p.llc_bytes},
              {"time_slope_s_per_patch", p.time_slope_s_per_patch},
              {"time_intercept_s", p.time_intercept_s},
              {"density_time_coeff_s", p.density_time_coeff_s},
              {"llc_base", p.llc_base},
              {"llc_sensitivity", p.llc_sensitivity},
              {"time_noise_rel", p.time_noise_rel},
              {"llc_noise_abs", p.llc_noise_abs},
              {"warm_factor", p.warm_factor}};
}

}  // namespace detail

struct CliConfig {
  std::string profile_name = "intel-i7-13700";
  std::vector<hwmodel::HardwareProfile> custom_profiles;
  experiments::ExperimentConfig experiment;  // profile resolved on demand
  bool cache_set = false;  // whether the document pinned the cache state

  const hwmodel::HardwareProfile& resolve_profile() const {
    for (const hwmodel::HardwareProfile& p : custom_profiles) {
      if (p.name == profile_name) return p;
    }
    return hwmodel::find_profile(profile_name);
  }
};

inline CliConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config: invalid JSON: ") + e.what());
  }
  detail::check_keys(j,
                     {"profile", "per_class", "cache", "load",
                      "stress_llc_offset", "mode", "split_fraction", "seeds",
                      "tree", "scenarios", "grid_candidates", "generator",
                      "profiles"},
                     "top level");
  CliConfig cfg;
  experiments::ExperimentConfig& e = cfg.experiment;

  if (j.contains("profile")) cfg.profile_name = j["profile"].get<std::string>();
  if (j.contains("per_class")) e.per_class = j["per_class"].get<int>();
  if (j.contains("cache")) {
    e.cache = hwmodel::cache_state_from(j["cache"].get<std::string>());
    cfg.cache_set = true;
  }
  if (j.contains("load")) {
    const std::string kind = j["load"].get<std::string>();
    if (kind == "idle") {
      e.load = hwmodel::LoadCondition::idle();
    } else if (kind == "stressed") {
      e.load = hwmodel::LoadCondition::stressed(
          j.value("stress_llc_offset",
                  hwmodel::LoadCondition::kDefaultStressOffset));
    } else {
      throw ParseError("config: load must be 'idle' or 'stressed'");
    }
  } else if (j.contains("stress_llc_offset")) {
    throw ParseError("config: stress_llc_offset requires load = 'stressed'");
  }
  if (j.contains("mode")) {
    e.mode = anyres::preprocess_mode_from(j["mode"].get<std::string>());
  }
  if (j.contains("split_fraction")) {
    e.split_fraction = j["split_fraction"].get<double>();
  }
  if (j.contains("seeds")) {
    detail::check_keys(j["seeds"], {"dataset", "noise", "split"}, "seeds");
    e.seeds.dataset = j["seeds"].value("dataset", e.seeds.dataset);
    e.seeds.noise = j["seeds"].value("noise", e.seeds.noise);
    e.seeds.split = j["seeds"].value("split", e.seeds.split);
  }
  if (j.contains("tree")) {
    detail::check_keys(j["tree"], {"max_depth", "min_leaf"}, "tree");
    e.tree.max_depth = j["tree"].value("max_depth", e.tree.max_depth);
    e.tree.min_leaf = j["tree"].value("min_leaf", e.tree.min_leaf);
  }
  if (j.contains("scenarios")) {
    e.scenarios.clear();
    for (const json& s : j["scenarios"]) {
      detail::check_keys(s, {"label", "content", "width", "height"},
                         "scenarios[]");
      experiments::ScenarioSpec spec;
      spec.label = s.at("label").get<std::string>();
      if (spec.label.find(',') != std::string::npos ||
          spec.label.find(':') != std::string::npos) {
        throw ParseError("config: scenario labels may not contain ',' or ':'");
      }
      spec.content =
          imagegen::content_class_from(s.at("content").get<std::string>());
      spec.aspect = {s.at("width").get<int>(), s.at("height").get<int>()};
      e.scenarios.push_back(spec);
    }
  }
  if (j.contains("grid_candidates")) {
    detail::check_keys(j["grid_candidates"], {"max_total_patches", "grids"},
                       "grid_candidates");
    anyres::GridCandidateSet set;
    set.max_total_patches =
        j["grid_candidates"].value("max_total_patches", 7);
    set.candidates.clear();
    for (const json& g : j["grid_candidates"].at("grids")) {
      if (!g.is_array() || g.size() != 2) {
        throw ParseError("config: each grid must be [m, n]");
      }
      set.candidates.push_back({g[0].get<int>(), g[1].get<int>()});
    }
    set.validate();
    e.grids = set;
  }
  if (j.contains("generator")) {
    detail::check_keys(j["generator"], {"edge_threshold"}, "generator");
    e.edge_threshold =
        j["generator"].value("edge_threshold", e.edge_threshold);
  }
  if (j.contains("profiles")) {
    for (const json& p : j["profiles"]) {
      cfg.custom_profiles.push_back(detail::parse_profile(p));
      cfg.custom_profiles.back().validate(e.grids.max_total_patches);
    }
  }
  return cfg;
}

inline CliConfig load_config_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("config: cannot open " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config(buf.str());
}

}  // namespace sidechan::config
