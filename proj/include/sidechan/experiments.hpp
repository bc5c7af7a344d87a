#pragma once

// Named, seeded experiments that reproduce the headline measurements:
// geometry timing gaps, semantic LLC ordering, the combined classifier,
// mitigation overheads and load robustness. Every statistic a bundle
// reports is recomputable from its raw observation table.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "sidechan/anyres.hpp"
#include "sidechan/attack.hpp"
#include "sidechan/common.hpp"
#include "sidechan/hwmodel.hpp"
#include "sidechan/imagegen.hpp"
#include "sidechan/telemetry.hpp"

namespace sidechan::experiments {

using json = nlohmann::ordered_json;

struct ScenarioSpec {
  std::string label;
  imagegen::ContentClass content = imagegen::ContentClass::Document;
  anyres::AspectRatio aspect;
};

struct Seeds {
  std::uint64_t dataset = 1;
  std::uint64_t noise = 2;
  std::uint64_t split = 3;
};

struct TreeParams {
  int max_depth = 3;
  int min_leaf = 5;
};

struct ExperimentConfig {
  hwmodel::HardwareProfile profile;  // resolved profile, not just a name
  std::vector<ScenarioSpec> scenarios;
  int per_class = 250;
  hwmodel::CacheState cache = hwmodel::CacheState::Cold;
  hwmodel::LoadCondition load = hwmodel::LoadCondition::idle();
  anyres::PreprocessMode mode = anyres::PreprocessMode::Dynamic;
  double split_fraction = 0.7;
  Seeds seeds;
  TreeParams tree;
  anyres::GridCandidateSet grids = anyres::default_candidates();
  double edge_threshold = imagegen::kEdgeThreshold;

  void validate() const {
    profile.validate(grids.max_total_patches);
    grids.validate();
    load.validate();
    if (per_class < 2) throw ConfigError("per_class must be >= 2");
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
      throw ConfigError("split_fraction must be in (0,1)");
    }
  }
};

struct RawRow {
  int trial = 0;
  double time_s = 0.0;
  double llc_misses = 0.0;
  std::string label;
};

struct Assertion {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ReportBundle {
  std::string experiment;
  std::vector<RawRow> raw;
  json summary;
  std::optional<attack::ClassReport> report;
  std::optional<std::string> tree_text;
  std::vector<Assertion> assertions;

  bool all_assertions_pass() const {
    for (const Assertion& a : assertions) {
      if (!a.pass) return false;
    }
    return true;
  }
};

// --- default scenario sets -------------------------------------------------

inline std::vector<ScenarioSpec> geometry_scenarios() {
  return {{"portrait", imagegen::ContentClass::Document, {336, 672}},
          {"square", imagegen::ContentClass::Document, {672, 672}}};
}

inline std::vector<ScenarioSpec> semantic_scenarios() {
  return {{"crypto-noise", imagegen::ContentClass::CryptoNoise, {672, 672}},
          {"document", imagegen::ContentClass::Document, {672, 672}},
          {"nature", imagegen::ContentClass::Nature, {672, 672}},
          {"xray", imagegen::ContentClass::XRay, {672, 672}}};
}

// The four high-risk assets: scenario = (generator, characteristic aspect).
inline std::vector<ScenarioSpec> combined_scenarios() {
  return {{"MedicalReport", imagegen::ContentClass::Document, {336, 672}},
          {"ChestXRay", imagegen::ContentClass::XRay, {336, 672}},
          {"EncryptedData", imagegen::ContentClass::CryptoNoise, {672, 672}},
          {"TechSchematic", imagegen::ContentClass::XRay, {672, 672}}};
}

inline std::vector<ScenarioSpec> load_scenarios() {
  return {{"crypto-noise", imagegen::ContentClass::CryptoNoise, {672, 672}},
          {"xray", imagegen::ContentClass::XRay, {672, 672}}};
}

// --- helpers ----------------------------------------------------------------

namespace detail {

struct GroupStats {
  int count = 0;
  double time_mean = 0.0, time_sd = 0.0, time_min = 0.0, time_max = 0.0;
  double llc_mean = 0.0, llc_sd = 0.0;
};

inline std::map<std::string, GroupStats> group_stats(
    const std::vector<RawRow>& raw) {
  std::map<std::string, std::vector<double>> times, llcs;
  for (const RawRow& r : raw) {
    times[r.label].push_back(r.time_s);
    llcs[r.label].push_back(r.llc_misses);
  }
  std::map<std::string, GroupStats> out;
  for (const auto& [label, ts] : times) {
    GroupStats g;
    g.count = static_cast<int>(ts.size());
    g.time_mean = mean_of(ts);
    g.time_sd = stddev_of(ts);
    g.time_min = min_of(ts);
    g.time_max = max_of(ts);
    g.llc_mean = mean_of(llcs[label]);
    g.llc_sd = stddev_of(llcs[label]);
    out[label] = g;
  }
  return out;
}

inline json groups_json(const std::map<std::string, GroupStats>& groups) {
  json j = json::object();
  for (const auto& [label, g] : groups) {
    j[label] = {{"count", g.count},
                {"time_mean_s", g.time_mean},
                {"time_sd_s", g.time_sd},
                {"time_min_s", g.time_min},
                {"time_max_s", g.time_max},
                {"llc_mean", g.llc_mean},
                {"llc_sd", g.llc_sd}};
  }
  return j;
}

inline std::string aspect_key(const anyres::AspectRatio& a) {
  return std::to_string(a.width_px) + "x" + std::to_string(a.height_px);
}

}  // namespace detail

// Recomputes the per-group statistics from the raw table and checks them
// against what the summary reports.
inline void verify_self_consistency(const ReportBundle& bundle) {
  if (!bundle.summary.contains("groups")) return;
  const auto groups = detail::group_stats(bundle.raw);
  const json expect = detail::groups_json(groups);
  const json& have = bundle.summary.at("groups");
  if (expect != have) {
    throw Error(bundle.experiment +
                ": summary statistics disagree with the raw table");
  }
}

// --- geometry ----------------------------------------------------------------

// Timing distributions per aspect ratio under both cache states, at zero
// structural density (the geometric benchmark isolates patch-count effects).
inline ReportBundle run_geometry(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto scenarios =
      cfg.scenarios.empty() ? geometry_scenarios() : cfg.scenarios;
  {
    std::set<std::string> distinct;
    for (const ScenarioSpec& s : scenarios) {
      distinct.insert(detail::aspect_key(s.aspect));
    }
    if (distinct.size() < 2) {
      throw ConfigError("geometry: need at least 2 distinct aspect ratios");
    }
  }

  ReportBundle bundle;
  bundle.experiment = "geometry";
  std::uint64_t trial_seed = cfg.seeds.noise;
  int trial = 0;
  for (hwmodel::CacheState cache :
       {hwmodel::CacheState::Cold, hwmodel::CacheState::Warm}) {
    for (const ScenarioSpec& s : scenarios) {
      const anyres::PreprocessPlan plan =
          anyres::plan_preprocess(s.aspect, cfg.mode, cfg.grids);
      for (int i = 0; i < cfg.per_class; ++i) {
        const hwmodel::Observation obs = hwmodel::simulate(
            plan, 0.0, cfg.profile, cache, cfg.load, trial_seed++);
        bundle.raw.push_back({trial++, obs.time_s, obs.llc_misses,
                              s.label + ":" + hwmodel::to_string(cache)});
      }
    }
  }

  const auto groups = detail::group_stats(bundle.raw);
  bundle.summary["experiment"] = "geometry";
  bundle.summary["profile"] = cfg.profile.name;
  bundle.summary["mode"] = anyres::to_string(cfg.mode);
  bundle.summary["per_class"] = cfg.per_class;
  bundle.summary["groups"] = detail::groups_json(groups);

  for (hwmodel::CacheState cache :
       {hwmodel::CacheState::Cold, hwmodel::CacheState::Warm}) {
    const std::string suffix = ":" + hwmodel::to_string(cache);
    const detail::GroupStats* fast = nullptr;
    const detail::GroupStats* slow = nullptr;
    for (const auto& [label, g] : groups) {
      if (!label.ends_with(suffix)) continue;
      if (!fast || g.time_mean < fast->time_mean) fast = &g;
      if (!slow || g.time_mean > slow->time_mean) slow = &g;
    }
    const double ratio = slow->time_mean / fast->time_mean;
    const bool overlap = slow->time_min < fast->time_max;
    bundle.summary["ratio" + std::string(suffix == ":cold" ? "_cold" : "_warm")] =
        ratio;
    bundle.summary[std::string("overlap") +
                   (suffix == ":cold" ? "_cold" : "_warm")] = overlap;
    if (cfg.mode == anyres::PreprocessMode::Dynamic) {
      bundle.assertions.push_back(
          {"clusters_disjoint" + suffix, !overlap,
           "slow min " + format_double(slow->time_min) + " vs fast max " +
               format_double(fast->time_max)});
    } else {
      bundle.assertions.push_back(
          {"ratio_is_one" + suffix, std::abs(ratio - 1.0) <= 0.02,
           "ratio " + format_double(ratio)});
    }
  }
  verify_self_consistency(bundle);
  return bundle;
}

// --- semantic -----------------------------------------------------------------

// Per-content-class means at a fixed geometry; the content signal lives in
// the LLC column while the time column stays within a few percent.
inline ReportBundle run_semantic(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto scenarios =
      cfg.scenarios.empty() ? semantic_scenarios() : cfg.scenarios;
  for (const ScenarioSpec& s : scenarios) {
    if (!same_ratio(s.aspect, scenarios.front().aspect)) {
      throw ConfigError("semantic: all scenarios must share one aspect ratio");
    }
  }

  std::vector<std::pair<imagegen::ContentClass, anyres::AspectRatio>> classes;
  for (const ScenarioSpec& s : scenarios) {
    classes.emplace_back(s.content, s.aspect);
  }
  const auto dataset = imagegen::build_dataset(classes, cfg.per_class,
                                               cfg.seeds.dataset,
                                               cfg.edge_threshold);

  ReportBundle bundle;
  bundle.experiment = "semantic";
  std::map<std::string, std::vector<double>> densities;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const ScenarioSpec& s = scenarios[i / cfg.per_class];
    const anyres::PreprocessPlan plan =
        anyres::plan_preprocess(s.aspect, cfg.mode, cfg.grids);
    const hwmodel::Observation obs =
        hwmodel::simulate(plan, dataset[i].second.density, cfg.profile,
                          cfg.cache, cfg.load, cfg.seeds.noise + i);
    bundle.raw.push_back(
        {static_cast<int>(i), obs.time_s, obs.llc_misses, s.label});
    densities[s.label].push_back(dataset[i].second.density);
  }

  const auto groups = detail::group_stats(bundle.raw);
  bundle.summary["experiment"] = "semantic";
  bundle.summary["profile"] = cfg.profile.name;
  bundle.summary["cache"] = hwmodel::to_string(cfg.cache);
  bundle.summary["per_class"] = cfg.per_class;
  bundle.summary["groups"] = detail::groups_json(groups);
  {
    json d = json::object();
    for (const auto& [label, xs] : densities) d[label] = mean_of(xs);
    bundle.summary["density_means"] = d;
  }

  double t_min = 0.0, t_max = 0.0, llc_min = 0.0, llc_max = 0.0;
  bool first = true;
  for (const auto& [label, g] : groups) {
    if (first) {
      t_min = t_max = g.time_mean;
      llc_min = llc_max = g.llc_mean;
      first = false;
    }
    t_min = std::min(t_min, g.time_mean);
    t_max = std::max(t_max, g.time_mean);
    llc_min = std::min(llc_min, g.llc_mean);
    llc_max = std::max(llc_max, g.llc_mean);
  }
  const double spread = (t_max - t_min) / t_min;
  const double max_gap = llc_max - llc_min;
  const double noise_floor = cfg.profile.llc_noise_abs;
  const bool observable = max_gap >= noise_floor;
  bundle.summary["time_spread_rel"] = spread;
  bundle.summary["llc_max_gap"] = max_gap;
  bundle.summary["llc_noise_floor"] = noise_floor;
  bundle.summary["verdict"] =
      observable ? "observable" : "not observable";

  if (cfg.profile.llc_sensitivity > 0.0) {
    bundle.assertions.push_back({"time_spread_below_3pct", spread < 0.03,
                                 "spread " + format_double(spread)});
    // Canonical contention order, for whichever of the four classes appear.
    const std::vector<imagegen::ContentClass> order{
        imagegen::ContentClass::CryptoNoise, imagegen::ContentClass::Document,
        imagegen::ContentClass::Nature, imagegen::ContentClass::XRay};
    double prev = -1.0;
    bool ordered = true;
    for (imagegen::ContentClass c : order) {
      for (const ScenarioSpec& s : scenarios) {
        if (s.content != c) continue;
        const double m = groups.at(s.label).llc_mean;
        if (m <= prev) ordered = false;
        prev = m;
      }
    }
    bundle.assertions.push_back(
        {"llc_ordering", ordered, "class means must rise with density"});
  } else {
    bundle.assertions.push_back({"semantic_gap_not_observable", !observable,
                                 "max gap " + format_double(max_gap)});
  }
  verify_self_consistency(bundle);
  return bundle;
}

// --- combined -----------------------------------------------------------------

namespace detail {

inline std::map<std::string, std::string> label_geometry(
    const std::vector<ScenarioSpec>& scenarios) {
  std::map<std::string, std::string> out;
  for (const ScenarioSpec& s : scenarios) {
    out[s.label] = aspect_key(s.aspect);
  }
  return out;
}

struct GeometryBreakdown {
  int cross_confusions = 0;
  double geometry_accuracy = 1.0;
  double within_geometry_accuracy = 1.0;
};

inline GeometryBreakdown geometry_breakdown(
    const attack::ConfusionMatrix& cm,
    const std::map<std::string, std::string>& geom_of) {
  GeometryBreakdown out;
  int total = 0, geometry_ok = 0, exact_ok = 0;
  for (std::size_t i = 0; i < cm.labels.size(); ++i) {
    for (std::size_t j = 0; j < cm.labels.size(); ++j) {
      const int n = cm.counts[i][j];
      total += n;
      const auto gi = geom_of.find(cm.labels[i]);
      const auto gj = geom_of.find(cm.labels[j]);
      const bool same_geom = gi != geom_of.end() && gj != geom_of.end() &&
                             gi->second == gj->second;
      if (same_geom) {
        geometry_ok += n;
        if (i == j) exact_ok += n;
      } else {
        out.cross_confusions += n;
      }
    }
  }
  out.geometry_accuracy =
      total > 0 ? static_cast<double>(geometry_ok) / total : 0.0;
  out.within_geometry_accuracy =
      geometry_ok > 0 ? static_cast<double>(exact_ok) / geometry_ok : 0.0;
  return out;
}

inline json report_json(const attack::ClassReport& rep) {
  json j;
  j["accuracy"] = rep.accuracy;
  json per = json::object();
  for (const auto& [label, m] : rep.per_class) {
    per[label] = {{"precision", m.precision},
                  {"recall", m.recall},
                  {"f1", m.f1},
                  {"support", m.support}};
  }
  j["per_class"] = per;
  json labels = json::array();
  for (const std::string& l : rep.confusion.labels) labels.push_back(l);
  j["confusion_labels"] = labels;
  j["confusion"] = rep.confusion.counts;
  return j;
}

}  // namespace detail

// Full dual-channel attack: dataset -> simulation -> stratified split ->
// depth-limited tree -> evaluation.
inline ReportBundle run_combined(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto scenarios =
      cfg.scenarios.empty() ? combined_scenarios() : cfg.scenarios;
  if (scenarios.size() < 2) {
    throw ConfigError("combined: need at least two scenarios");
  }

  std::vector<std::pair<imagegen::ContentClass, anyres::AspectRatio>> classes;
  for (const ScenarioSpec& s : scenarios) {
    classes.emplace_back(s.content, s.aspect);
  }
  const auto dataset = imagegen::build_dataset(classes, cfg.per_class,
                                               cfg.seeds.dataset,
                                               cfg.edge_threshold);

  ReportBundle bundle;
  bundle.experiment = "combined";
  std::vector<attack::LabeledSample> samples;
  samples.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const ScenarioSpec& s = scenarios[i / cfg.per_class];
    const anyres::PreprocessPlan plan =
        anyres::plan_preprocess(s.aspect, cfg.mode, cfg.grids);
    const hwmodel::Observation obs =
        hwmodel::simulate(plan, dataset[i].second.density, cfg.profile,
                          cfg.cache, cfg.load, cfg.seeds.noise + i);
    samples.push_back({obs, s.label});
    bundle.raw.push_back(
        {static_cast<int>(i), obs.time_s, obs.llc_misses, s.label});
  }

  const attack::SplitResult split =
      attack::stratified_split(samples, cfg.split_fraction, cfg.seeds.split);
  const attack::DecisionTree tree =
      attack::DecisionTree::fit(split.train, cfg.tree.max_depth,
                                cfg.tree.min_leaf);
  const attack::ClassReport report = attack::evaluate(tree, split.test);

  const auto geom_of = detail::label_geometry(scenarios);
  const auto breakdown = detail::geometry_breakdown(report.confusion, geom_of);

  bundle.summary["experiment"] = "combined";
  bundle.summary["profile"] = cfg.profile.name;
  bundle.summary["cache"] = hwmodel::to_string(cfg.cache);
  bundle.summary["per_class"] = cfg.per_class;
  bundle.summary["split_fraction"] = cfg.split_fraction;
  bundle.summary["seeds"] = {{"dataset", cfg.seeds.dataset},
                             {"noise", cfg.seeds.noise},
                             {"split", cfg.seeds.split}};
  bundle.summary["tree_params"] = {{"max_depth", cfg.tree.max_depth},
                                   {"min_leaf", cfg.tree.min_leaf}};
  bundle.summary["sigma_c"] = cfg.profile.llc_noise_abs;
  bundle.summary["groups"] = detail::groups_json(detail::group_stats(bundle.raw));
  bundle.summary["report"] = detail::report_json(report);
  bundle.summary["cross_geometry_confusions"] = breakdown.cross_confusions;
  bundle.summary["geometry_accuracy"] = breakdown.geometry_accuracy;
  bundle.summary["within_geometry_accuracy"] =
      breakdown.within_geometry_accuracy;
  bundle.summary["tree_depth"] = tree.depth();
  if (!tree.root().is_leaf) {
    bundle.summary["root_split"] = {
        {"feature", attack::to_string(tree.root().feature)},
        {"threshold", tree.root().threshold}};
  }
  bundle.report = report;
  bundle.tree_text = tree.to_text();
  bundle.assertions.push_back({"zero_cross_geometry_confusion",
                               breakdown.cross_confusions == 0,
                               std::to_string(breakdown.cross_confusions) +
                                   " cross-geometry cells"});
  verify_self_consistency(bundle);
  return bundle;
}

// --- mitigation ----------------------------------------------------------------

// Latency cost and residual leakage of the hardened preprocessing modes,
// on the geometric benchmark.
inline ReportBundle run_mitigation(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto scenarios =
      cfg.scenarios.empty() ? geometry_scenarios() : cfg.scenarios;

  ReportBundle bundle;
  bundle.experiment = "mitigation";
  std::uint64_t trial_seed = cfg.seeds.noise;
  int trial = 0;
  std::vector<attack::LabeledSample> padded_samples;
  for (anyres::PreprocessMode mode :
       {anyres::PreprocessMode::Dynamic, anyres::PreprocessMode::ConstantPad,
        anyres::PreprocessMode::StaticPrivacy}) {
    for (const ScenarioSpec& s : scenarios) {
      const anyres::PreprocessPlan plan =
          anyres::plan_preprocess(s.aspect, mode, cfg.grids);
      for (int i = 0; i < cfg.per_class; ++i) {
        const hwmodel::Observation obs = hwmodel::simulate(
            plan, 0.0, cfg.profile, cfg.cache, cfg.load, trial_seed++);
        bundle.raw.push_back({trial++, obs.time_s, obs.llc_misses,
                              s.label + ":" + anyres::to_string(mode)});
        if (mode == anyres::PreprocessMode::ConstantPad) {
          padded_samples.push_back({obs, s.label});
        }
      }
    }
  }

  const auto groups = detail::group_stats(bundle.raw);
  bundle.summary["experiment"] = "mitigation";
  bundle.summary["profile"] = cfg.profile.name;
  bundle.summary["cache"] = hwmodel::to_string(cfg.cache);
  bundle.summary["per_class"] = cfg.per_class;
  bundle.summary["groups"] = detail::groups_json(groups);

  json overhead = json::object();
  for (const ScenarioSpec& s : scenarios) {
    const double dyn = groups.at(s.label + ":dynamic").time_mean;
    json per_mode = json::object();
    for (const char* mode : {"constant-pad", "static"}) {
      const double t = groups.at(s.label + ":" + mode).time_mean;
      per_mode[mode] = 100.0 * (t - dyn) / dyn;
    }
    overhead[s.label] = per_mode;
  }
  bundle.summary["overhead_pct_vs_dynamic"] = overhead;

  // Residual geometry leakage under constant-work padding.
  const attack::SplitResult split = attack::stratified_split(
      padded_samples, cfg.split_fraction, cfg.seeds.split);
  const attack::DecisionTree tree = attack::DecisionTree::fit(
      split.train, cfg.tree.max_depth, cfg.tree.min_leaf);
  const attack::ClassReport rep = attack::evaluate(tree, split.test);
  bundle.summary["constant_pad_geometry_accuracy"] = rep.accuracy;

  // Mode ratios across the fastest/slowest scenario, per mode.
  json ratios = json::object();
  for (const char* mode : {"dynamic", "constant-pad", "static"}) {
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (const ScenarioSpec& s : scenarios) {
      const double t = groups.at(s.label + ":" + mode).time_mean;
      if (first) {
        lo = hi = t;
        first = false;
      }
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
    ratios[mode] = hi / lo;
  }
  bundle.summary["timing_ratio_per_mode"] = ratios;

  const double pad_ratio = ratios["constant-pad"].get<double>();
  bundle.assertions.push_back({"constant_pad_ratio_is_one",
                               std::abs(pad_ratio - 1.0) <= 0.02,
                               "ratio " + format_double(pad_ratio)});
  // Static mode must undercut dynamic on the heaviest geometry.
  {
    double worst_dyn = 0.0, worst_static = 0.0;
    for (const ScenarioSpec& s : scenarios) {
      worst_dyn =
          std::max(worst_dyn, groups.at(s.label + ":dynamic").time_mean);
      worst_static =
          std::max(worst_static, groups.at(s.label + ":static").time_mean);
    }
    bundle.assertions.push_back(
        {"static_faster_than_dynamic_worst_case", worst_static < worst_dyn,
         format_double(worst_static) + " vs " + format_double(worst_dyn)});
  }
  verify_self_consistency(bundle);
  return bundle;
}

// --- load robustness -------------------------------------------------------------

// Separation gap between the densest and sparsest content classes under an
// idle system and under synthetic background cache pressure.
inline ReportBundle run_load_robustness(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto scenarios =
      cfg.scenarios.empty() ? load_scenarios() : cfg.scenarios;
  const ScenarioSpec* noise_s = nullptr;
  const ScenarioSpec* xray_s = nullptr;
  for (const ScenarioSpec& s : scenarios) {
    if (s.content == imagegen::ContentClass::CryptoNoise) noise_s = &s;
    if (s.content == imagegen::ContentClass::XRay) xray_s = &s;
  }
  if (noise_s == nullptr || xray_s == nullptr) {
    throw ConfigError(
        "load: scenarios must include crypto-noise and xray content");
  }

  std::vector<std::pair<imagegen::ContentClass, anyres::AspectRatio>> classes;
  for (const ScenarioSpec& s : scenarios) {
    classes.emplace_back(s.content, s.aspect);
  }
  const auto dataset = imagegen::build_dataset(classes, cfg.per_class,
                                               cfg.seeds.dataset,
                                               cfg.edge_threshold);

  ReportBundle bundle;
  bundle.experiment = "load";
  const hwmodel::LoadCondition stressed =
      cfg.load.kind == hwmodel::LoadCondition::Kind::Stressed
          ? cfg.load
          : hwmodel::LoadCondition::stressed();
  int trial = 0;
  for (const hwmodel::LoadCondition& cond :
       {hwmodel::LoadCondition::idle(), stressed}) {
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const ScenarioSpec& s = scenarios[i / cfg.per_class];
      const anyres::PreprocessPlan plan =
          anyres::plan_preprocess(s.aspect, cfg.mode, cfg.grids);
      // Same per-image noise seed for both conditions: only the offset moves.
      const hwmodel::Observation obs =
          hwmodel::simulate(plan, dataset[i].second.density, cfg.profile,
                            cfg.cache, cond, cfg.seeds.noise + i);
      bundle.raw.push_back({trial++, obs.time_s, obs.llc_misses,
                            s.label + ":" + hwmodel::to_string(cond.kind)});
    }
  }

  const auto groups = detail::group_stats(bundle.raw);
  bundle.summary["experiment"] = "load";
  bundle.summary["profile"] = cfg.profile.name;
  bundle.summary["per_class"] = cfg.per_class;
  bundle.summary["stress_llc_offset"] = stressed.llc_offset;
  bundle.summary["groups"] = detail::groups_json(groups);

  const double delta_idle = groups.at(xray_s->label + ":idle").llc_mean -
                            groups.at(noise_s->label + ":idle").llc_mean;
  const double delta_stressed =
      groups.at(xray_s->label + ":stressed").llc_mean -
      groups.at(noise_s->label + ":stressed").llc_mean;
  bundle.summary["separation_gap_idle"] = delta_idle;
  bundle.summary["separation_gap_stressed"] = delta_stressed;
  bundle.summary["gap_shift"] = delta_stressed - delta_idle;
  bundle.summary["absolute_shift"] = {
      {noise_s->label, groups.at(noise_s->label + ":stressed").llc_mean -
                           groups.at(noise_s->label + ":idle").llc_mean},
      {xray_s->label, groups.at(xray_s->label + ":stressed").llc_mean -
                          groups.at(xray_s->label + ":idle").llc_mean}};
  bundle.assertions.push_back(
      {"gap_stable_under_load",
       std::abs(delta_idle - delta_stressed) <= 0.1e9,
       "idle " + format_double(delta_idle) + " vs stressed " +
           format_double(delta_stressed)});
  verify_self_consistency(bundle);
  return bundle;
}

// --- calibration ------------------------------------------------------------------

struct CalibrationResult {
  double sigma_c = 0.0;
  double accuracy = 0.0;
  json sweep_table;
};

// Sweeps the LLC noise parameter, replaying the combined attack with fixed
// seeds, and returns the value whose accuracy lands closest to the target.
inline CalibrationResult calibrate_noise(const ExperimentConfig& cfg,
                                         double target_accuracy,
                                         double tolerance,
                                         const std::vector<double>& sweep) {
  if (sweep.empty()) throw ConfigError("calibrate: empty sweep");
  CalibrationResult result;
  result.sweep_table = json::array();
  double best_diff = -1.0;
  for (double sigma : sweep) {
    ExperimentConfig c = cfg;
    c.profile.llc_noise_abs = sigma;
    const ReportBundle b = run_combined(c);
    const double acc = b.report->accuracy;
    result.sweep_table.push_back({{"sigma_c", sigma}, {"accuracy", acc}});
    const double diff = std::abs(acc - target_accuracy);
    if (best_diff < 0.0 || diff < best_diff) {
      best_diff = diff;
      result.sigma_c = sigma;
      result.accuracy = acc;
    }
  }
  if (best_diff > tolerance) {
    throw ConfigError("calibrate: no sigma_c within tolerance of target " +
                      format_double(target_accuracy) + "; sweep: " +
                      result.sweep_table.dump());
  }
  return result;
}

// --- bundle output -------------------------------------------------------------

namespace detail {

inline void atomic_write(const std::filesystem::path& path,
                         const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw Error("cannot open " + tmp.string() + " for writing");
    os << content;
  }
  std::filesystem::rename(tmp, path);
}

inline std::string raw_csv(const std::vector<RawRow>& raw) {
  std::ostringstream os;
  os << "trial,time_s,llc_misses,label\n";
  for (const RawRow& r : raw) {
    os << r.trial << "," << format_double(r.time_s) << ","
       << format_double(r.llc_misses) << "," << r.label << "\n";
  }
  return os.str();
}

// Minimal static scatter rendering of the raw table (time vs llc).
inline std::string scatter_svg(const std::vector<RawRow>& raw) {
  static const char* kPalette[] = {"#4363d8", "#e6194b", "#3cb44b", "#f58231",
                                   "#911eb4", "#46f0f0", "#f032e6", "#808000"};
  const int width = 720, height = 480, margin = 56;
  double t_lo = 0, t_hi = 1, c_lo = 0, c_hi = 1;
  bool first = true;
  std::map<std::string, std::size_t> color_of;
  for (const RawRow& r : raw) {
    if (first) {
      t_lo = t_hi = r.time_s;
      c_lo = c_hi = r.llc_misses;
      first = false;
    }
    t_lo = std::min(t_lo, r.time_s);
    t_hi = std::max(t_hi, r.time_s);
    c_lo = std::min(c_lo, r.llc_misses);
    c_hi = std::max(c_hi, r.llc_misses);
    color_of.emplace(r.label, color_of.size());
  }
  if (t_hi <= t_lo) t_hi = t_lo + 1.0;
  if (c_hi <= c_lo) c_hi = c_lo + 1.0;
  auto sx = [&](double t) {
    return margin + (t - t_lo) / (t_hi - t_lo) * (width - 2 * margin);
  };
  auto sy = [&](double c) {
    return height - margin - (c - c_lo) / (c_hi - c_lo) * (height - 2 * margin);
  };
  char buf[160];
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
     << "\" height=\"" << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof(buf),
                "<g stroke=\"#222\"><line x1=\"%d\" y1=\"%d\" x2=\"%d\" "
                "y2=\"%d\"/><line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\"/></g>\n",
                margin, height - margin, width - margin, height - margin,
                margin, margin, margin, height - margin);
  os << buf;
  os << "<text x=\"" << width / 2 << "\" y=\"" << height - 12
     << "\" font-size=\"13\" text-anchor=\"middle\">execution time (s)</text>\n";
  os << "<text x=\"16\" y=\"" << height / 2
     << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << height / 2 << ")\">LLC misses</text>\n";
  for (const RawRow& r : raw) {
    const std::size_t ci = color_of.at(r.label) % 8;
    std::snprintf(buf, sizeof(buf),
                  "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2.2\" fill=\"%s\" "
                  "fill-opacity=\"0.55\"/>\n",
                  sx(r.time_s), sy(r.llc_misses), kPalette[ci]);
    os << buf;
  }
  int ly = margin;
  for (const auto& [label, ci] : color_of) {
    std::snprintf(buf, sizeof(buf),
                  "<circle cx=\"%d\" cy=\"%d\" r=\"4\" fill=\"%s\"/><text "
                  "x=\"%d\" y=\"%d\" font-size=\"12\">%s</text>\n",
                  width - margin - 130, ly, kPalette[ci % 8],
                  width - margin - 120, ly + 4, label.c_str());
    os << buf;
    ly += 18;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace detail

inline void write_bundle(const ReportBundle& bundle,
                         const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  detail::atomic_write(dir / "raw.csv", detail::raw_csv(bundle.raw));

  json summary = bundle.summary;
  json asserts = json::array();
  for (const Assertion& a : bundle.assertions) {
    asserts.push_back({{"name", a.name}, {"pass", a.pass}, {"detail", a.detail}});
  }
  summary["assertions"] = asserts;
  summary["assertions_pass"] = bundle.all_assertions_pass();
  detail::atomic_write(dir / "summary.json", summary.dump(2) + "\n");

  if (bundle.tree_text) {
    detail::atomic_write(dir / "tree.txt", *bundle.tree_text);
  }
  if (bundle.report) {
    detail::atomic_write(dir / "confusion.csv",
                         attack::confusion_csv(bundle.report->confusion));
    detail::atomic_write(dir / "report.json",
                         detail::report_json(*bundle.report).dump(2) + "\n");
    detail::atomic_write(dir / "report.csv", attack::report_csv(*bundle.report));
  }
  detail::atomic_write(dir / "scatter.svg", detail::scatter_svg(bundle.raw));
}

}  // namespace sidechan::experiments
