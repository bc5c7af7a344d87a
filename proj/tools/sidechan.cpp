// Command-line surface: dataset generation, named experiments, telemetry
// ingestion and the standalone attack pipeline.
//
// Exit codes: 0 success, 2 experiment assertion failure (bundle still
// written), 64 usage error, 65 unusable input data.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sidechan/anyres.hpp"
#include "sidechan/attack.hpp"
#include "sidechan/config.hpp"
#include "sidechan/experiments.hpp"
#include "sidechan/hwmodel.hpp"
#include "sidechan/imagegen.hpp"
#include "sidechan/telemetry.hpp"

namespace fs = std::filesystem;
using namespace sidechan;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAssertion = 2;
constexpr int kExitUsage = 64;
constexpr int kExitData = 65;

struct CommonFlags {
  std::string config_path;
  std::string profile;
  std::string mode;
  std::string cache;
  std::string load;
  int per_class = -1;
  std::int64_t seed = -1;
  std::string out_dir = "out";
};

config::CliConfig load_cli_config(const CommonFlags& flags) {
  config::CliConfig cfg;
  std::string path = flags.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("SIDECHAN_CONFIG")) path = env;
  }
  if (!path.empty()) cfg = config::load_config_file(path);
  if (!flags.profile.empty()) cfg.profile_name = flags.profile;
  if (!flags.mode.empty()) {
    cfg.experiment.mode = anyres::preprocess_mode_from(flags.mode);
  }
  if (!flags.cache.empty()) {
    cfg.experiment.cache = hwmodel::cache_state_from(flags.cache);
    cfg.cache_set = true;
  }
  if (!flags.load.empty()) {
    if (flags.load == "idle") {
      cfg.experiment.load = hwmodel::LoadCondition::idle();
    } else if (flags.load == "stressed") {
      cfg.experiment.load = hwmodel::LoadCondition::stressed();
    } else {
      throw ConfigError("--load must be idle or stressed");
    }
  }
  if (flags.per_class > 0) cfg.experiment.per_class = flags.per_class;
  if (flags.seed >= 0) {
    const auto s = static_cast<std::uint64_t>(flags.seed);
    cfg.experiment.seeds = {s, s + 1, s + 2};
  }
  return cfg;
}

void atomic_write_file(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw Error("cannot write " + tmp.string());
    os << content;
  }
  fs::rename(tmp, path);
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return buf.str();
}

int cmd_generate(const CommonFlags& flags, bool export_pgm) {
  config::CliConfig cfg = load_cli_config(flags);
  const auto scenarios = cfg.experiment.scenarios.empty()
                             ? experiments::semantic_scenarios()
                             : cfg.experiment.scenarios;
  fs::create_directories(flags.out_dir);
  std::ostringstream manifest;
  manifest << "class,width,height,seed,edge_density,coherence,density\n";
  for (std::size_t ci = 0; ci < scenarios.size(); ++ci) {
    for (int i = 0; i < cfg.experiment.per_class; ++i) {
      imagegen::ImageSpec spec{
          scenarios[ci].content, scenarios[ci].aspect,
          cfg.experiment.seeds.dataset +
              ci * static_cast<std::uint64_t>(cfg.experiment.per_class) +
              static_cast<std::uint64_t>(i)};
      const imagegen::PixelBuffer img = imagegen::generate(spec);
      const imagegen::DensityReport rep =
          imagegen::structural_density(img, cfg.experiment.edge_threshold);
      manifest << imagegen::to_string(spec.content) << ","
               << spec.aspect.width_px << "," << spec.aspect.height_px << ","
               << spec.seed << "," << format_double(rep.edge_density) << ","
               << format_double(rep.orientation_coherence) << ","
               << format_double(rep.density) << "\n";
      if (export_pgm) {
        fs::create_directories(fs::path(flags.out_dir) / "images");
        std::ostringstream name;
        name << imagegen::to_string(spec.content) << "_" << spec.seed
             << ".pgm";
        std::ofstream os(fs::path(flags.out_dir) / "images" / name.str(),
                         std::ios::binary);
        imagegen::write_pgm(img, os);
      }
    }
  }
  atomic_write_file(fs::path(flags.out_dir) / "manifest.csv", manifest.str());
  std::cout << "wrote "
            << scenarios.size() *
                   static_cast<std::size_t>(cfg.experiment.per_class)
            << " manifest rows to " << flags.out_dir << "/manifest.csv\n";
  return kExitOk;
}

void print_assertions(const experiments::ReportBundle& bundle) {
  for (const experiments::Assertion& a : bundle.assertions) {
    std::cout << (a.pass ? "  [ok]   " : "  [FAIL] ") << a.name << " ("
              << a.detail << ")\n";
  }
}

int cmd_run(const std::string& experiment, const CommonFlags& flags,
            double target, double tolerance, const std::string& sweep_spec) {
  config::CliConfig cfg = load_cli_config(flags);
  experiments::ExperimentConfig ex = cfg.experiment;
  ex.profile = cfg.resolve_profile();
  // The per-class tables in the literature are warm-cache numbers, so the
  // semantic experiment defaults to warm unless pinned by config or flag.
  if (experiment == "semantic" && !cfg.cache_set) {
    ex.cache = hwmodel::CacheState::Warm;
  }

  experiments::ReportBundle bundle;
  if (experiment == "geometry") {
    bundle = experiments::run_geometry(ex);
  } else if (experiment == "semantic") {
    bundle = experiments::run_semantic(ex);
  } else if (experiment == "combined") {
    bundle = experiments::run_combined(ex);
  } else if (experiment == "mitigation") {
    bundle = experiments::run_mitigation(ex);
  } else if (experiment == "load") {
    bundle = experiments::run_load_robustness(ex);
  } else if (experiment == "calibrate") {
    std::vector<double> sweep;
    double lo = 0.05e9, hi = 0.6e9, step = 0.05e9;
    if (!sweep_spec.empty()) {
      std::istringstream is(sweep_spec);
      char c1 = 0, c2 = 0;
      if (!(is >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':') {
        throw ConfigError("--sweep must be LO:HI:STEP");
      }
    }
    for (double s = lo; s <= hi + 1e-6; s += step) sweep.push_back(s);
    fs::create_directories(flags.out_dir);
    try {
      const experiments::CalibrationResult result =
          experiments::calibrate_noise(ex, target, tolerance, sweep);
      experiments::json out;
      out["target_accuracy"] = target;
      out["tolerance"] = tolerance;
      out["selected_sigma_c"] = result.sigma_c;
      out["selected_accuracy"] = result.accuracy;
      out["sweep"] = result.sweep_table;
      atomic_write_file(fs::path(flags.out_dir) / "calibration.json",
                        out.dump(2) + "\n");
      std::cout << "calibrate: sigma_c=" << format_double(result.sigma_c)
                << " accuracy=" << format_double(result.accuracy) << "\n";
      return kExitOk;
    } catch (const ConfigError& e) {
      experiments::json out;
      out["target_accuracy"] = target;
      out["tolerance"] = tolerance;
      out["error"] = e.what();
      atomic_write_file(fs::path(flags.out_dir) / "calibration.json",
                        out.dump(2) + "\n");
      std::cout << "calibrate: FAILED: " << e.what() << "\n";
      return kExitAssertion;
    }
  } else {
    std::cerr << "unknown experiment '" << experiment
              << "' (expected geometry|semantic|combined|mitigation|load|"
                 "calibrate)\n";
    return kExitUsage;
  }

  experiments::write_bundle(bundle, flags.out_dir);
  std::cout << bundle.experiment << " -> " << flags.out_dir << "\n";
  if (bundle.summary.contains("ratio_cold")) {
    std::cout << "  ratio cold="
              << format_double(bundle.summary["ratio_cold"].get<double>())
              << " warm="
              << format_double(bundle.summary["ratio_warm"].get<double>())
              << "\n";
  }
  if (bundle.summary.contains("verdict")) {
    std::cout << "  semantic gap: "
              << bundle.summary["verdict"].get<std::string>() << "\n";
  }
  if (bundle.report) {
    std::cout << "  accuracy="
              << format_double(bundle.report->accuracy) << "\n";
  }
  if (bundle.summary.contains("constant_pad_geometry_accuracy")) {
    std::cout << "  constant-pad geometry accuracy="
              << format_double(
                     bundle.summary["constant_pad_geometry_accuracy"]
                         .get<double>())
              << "\n";
  }
  if (bundle.summary.contains("separation_gap_idle")) {
    std::cout << "  gap idle="
              << format_double(
                     bundle.summary["separation_gap_idle"].get<double>())
              << " stressed="
              << format_double(
                     bundle.summary["separation_gap_stressed"].get<double>())
              << "\n";
  }
  print_assertions(bundle);
  return bundle.all_assertions_pass() ? kExitOk : kExitAssertion;
}

int cmd_ingest(const std::string& perf_path, const std::string& trace_path,
               const std::string& llc_event, char delimiter,
               const std::string& core, double busy_threshold,
               double min_duration, const std::string& out_path) {
  const auto records = telemetry::parse_perf_csv(read_file(perf_path), delimiter);
  std::ifstream trace_is(trace_path, std::ios::binary);
  if (!trace_is) throw DataError("cannot open " + trace_path);
  const auto samples = telemetry::read_trace(trace_is);
  const auto intervals =
      telemetry::segment_activity(samples, core, busy_threshold, min_duration);
  if (intervals.empty()) {
    throw DataError("ingest: no activity intervals detected");
  }

  std::vector<telemetry::PerfRecord> matching;
  for (const telemetry::PerfRecord& r : records) {
    if (r.event == llc_event) matching.push_back(r);
  }
  if (matching.empty()) {
    throw DataError("ingest: no records for event '" + llc_event + "'");
  }

  std::vector<telemetry::ObservationRow> rows;
  if (matching.size() == intervals.size()) {
    for (std::size_t i = 0; i < intervals.size(); ++i) {
      rows.push_back({static_cast<int>(i),
                      telemetry::to_observation({matching[i]}, intervals[i],
                                                llc_event),
                      ""});
    }
  } else if (intervals.size() == 1) {
    rows.push_back(
        {0, telemetry::to_observation(matching, intervals[0], llc_event), ""});
  } else {
    throw DataError("ingest: " + std::to_string(matching.size()) +
                    " counter records vs " + std::to_string(intervals.size()) +
                    " activity intervals; cannot pair trials");
  }

  const std::string csv = telemetry::write_observations(rows);
  if (out_path.empty() || out_path == "-") {
    std::cout << csv;
  } else {
    atomic_write_file(out_path, csv);
    std::cout << "wrote " << rows.size() << " observations to " << out_path
              << "\n";
  }
  return kExitOk;
}

int cmd_attack(const std::string& obs_path, const std::string& labels_path,
               double split_fraction, std::int64_t split_seed, int max_depth,
               int min_leaf, const std::string& out_dir) {
  auto rows = telemetry::read_observations(read_file(obs_path));
  if (!labels_path.empty()) {
    std::map<int, std::string> labels;
    const std::string text = read_file(labels_path);
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      if (line.empty() || (line_no == 1 && line == "trial,label")) continue;
      const std::size_t comma = line.find(',');
      if (comma == std::string::npos) {
        throw ParseError("labels line " + std::to_string(line_no) +
                         ": expected trial,label");
      }
      labels[std::stoi(line.substr(0, comma))] = line.substr(comma + 1);
    }
    for (auto& r : rows) {
      const auto it = labels.find(r.trial);
      if (it == labels.end()) {
        throw DataError("attack: no label for trial " +
                        std::to_string(r.trial));
      }
      r.label = it->second;
    }
  }
  std::vector<attack::LabeledSample> samples;
  for (const auto& r : rows) {
    if (r.label.empty()) {
      throw DataError("attack: trial " + std::to_string(r.trial) +
                      " has no label (use --labels)");
    }
    samples.push_back({r.obs, r.label});
  }

  const attack::SplitResult split = attack::stratified_split(
      samples, split_fraction, static_cast<std::uint64_t>(split_seed));
  const attack::DecisionTree tree =
      attack::DecisionTree::fit(split.train, max_depth, min_leaf);
  const attack::ClassReport report = attack::evaluate(tree, split.test);

  fs::create_directories(out_dir);
  atomic_write_file(fs::path(out_dir) / "report.json",
                    experiments::detail::report_json(report).dump(2) + "\n");
  atomic_write_file(fs::path(out_dir) / "report.csv",
                    attack::report_csv(report));
  atomic_write_file(fs::path(out_dir) / "confusion.csv",
                    attack::confusion_csv(report.confusion));
  atomic_write_file(fs::path(out_dir) / "tree.txt", tree.to_text());
  std::cout << "accuracy=" << format_double(report.accuracy) << " depth="
            << tree.depth() << " -> " << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic-resolution VLM preprocessing side-channel laboratory"};
  app.require_subcommand(1);

  CommonFlags flags;
  bool export_pgm = false;
  std::string experiment;
  double target = 0.84, tolerance = 0.05;
  std::string sweep_spec;
  std::string perf_path, trace_path, labels_path, obs_path, out_file;
  std::string llc_event = "LLC-load-misses";
  std::string core = "cpu4";
  std::string delimiter = ",";
  double busy_threshold = 0.8, min_duration = 2.0;
  double split_fraction = 0.7;
  std::int64_t split_seed = 3;
  int max_depth = 3, min_leaf = 5;

  auto add_common = [&](CLI::App* cmd, bool with_model_flags) {
    cmd->add_option("--config", flags.config_path,
                    "JSON config file (or $SIDECHAN_CONFIG)");
    cmd->add_option("--out", flags.out_dir, "output directory");
    cmd->add_option("--per-class", flags.per_class, "samples per class");
    cmd->add_option("--seed", flags.seed,
                    "base seed (dataset=N, noise=N+1, split=N+2)");
    if (with_model_flags) {
      cmd->add_option("--profile", flags.profile, "hardware profile name");
      cmd->add_option("--mode", flags.mode,
                      "preprocess mode: dynamic|constant-pad|static");
      cmd->add_option("--cache", flags.cache, "cache state: cold|warm");
      cmd->add_option("--load", flags.load, "load condition: idle|stressed");
    }
  };

  CLI::App* gen = app.add_subcommand("generate", "emit dataset manifest");
  add_common(gen, false);
  gen->add_flag("--pgm", export_pgm, "also write PGM images");

  CLI::App* run = app.add_subcommand("run", "run a named experiment");
  run->add_option("experiment", experiment,
                  "geometry|semantic|combined|mitigation|load|calibrate")
      ->required();
  add_common(run, true);
  run->add_option("--target", target, "calibrate: target accuracy");
  run->add_option("--tolerance", tolerance, "calibrate: accuracy tolerance");
  run->add_option("--sweep", sweep_spec, "calibrate: sigma_c sweep LO:HI:STEP");

  CLI::App* ingest = app.add_subcommand("ingest", "telemetry -> observations");
  ingest->add_option("--perf", perf_path, "counter output file")->required();
  ingest->add_option("--trace", trace_path, "procstat trace file")->required();
  ingest->add_option("--llc-event", llc_event, "counter event name");
  ingest->add_option("--delimiter", delimiter, "perf field delimiter");
  ingest->add_option("--core", core, "victim core label");
  ingest->add_option("--busy-threshold", busy_threshold, "busy fraction");
  ingest->add_option("--min-duration", min_duration, "minimum burst seconds");
  ingest->add_option("--out", out_file, "output CSV ('-' = stdout)");

  CLI::App* atk = app.add_subcommand("attack", "observations -> class report");
  atk->add_option("--observations", obs_path, "observation CSV")->required();
  atk->add_option("--labels", labels_path, "label CSV (trial,label)");
  atk->add_option("--split-fraction", split_fraction, "train fraction");
  atk->add_option("--seed", split_seed, "split seed");
  atk->add_option("--max-depth", max_depth, "tree depth limit");
  atk->add_option("--min-leaf", min_leaf, "minimum samples per leaf");
  atk->add_option("--out", flags.out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_generate(flags, export_pgm);
    if (run->parsed()) {
      return cmd_run(experiment, flags, target, tolerance, sweep_spec);
    }
    if (ingest->parsed()) {
      if (delimiter.size() != 1) {
        std::cerr << "--delimiter must be a single character\n";
        return kExitUsage;
      }
      return cmd_ingest(perf_path, trace_path, llc_event, delimiter[0], core,
                        busy_threshold, min_duration, out_file);
    }
    if (atk->parsed()) {
      return cmd_attack(obs_path, labels_path, split_fraction, split_seed,
                        max_depth, min_leaf, flags.out_dir);
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}
