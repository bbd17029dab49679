// psf: run finger and hand scenarios, build recognition datasets and
// classify grasps. Exit codes: 0 ok, 2 bad config or input, 3 scenario
// infeasible, 4 detection fault.
#include "psf/config.hpp"
#include "psf/io.hpp"
#include "psf/scenario.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace psf;

namespace {

constexpr int kOk = 0, kConfigError = 2, kInfeasible = 3, kFault = 4;

struct Common {
  std::string config;
  std::string scenario;
  std::uint64_t seed = 0;
  std::string out = ".";
  std::string format = "csv";
};

// Collects written files for the manifest.
class Outputs {
 public:
  explicit Outputs(const Common& c) : dir_(c.out) { fs::create_directories(dir_); }

  std::ofstream open(const std::string& name) {
    files_.push_back(name);
    std::ofstream f(dir_ / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (dir_ / name).string());
    return f;
  }
  template <class F>
  void write(const std::string& name, F&& f) {
    std::ofstream os = open(name);
    f(os);
  }
  void json_file(const std::string& name, const json& j) { open(name) << j.dump(2) << '\n'; }

  void manifest(const std::string& command, const Common& c, const std::vector<std::string>& argv) {
    json art = json::object();
    for (const std::string& f : files_) art[f] = sha256_file(dir_ / f);
    json m{{"command", command},
           {"argv", argv},
           {"scenario", c.scenario},
           {"config", c.config},
           {"seed", c.seed},
           {"out", c.out},
           {"artifacts", art}};
    std::ofstream(dir_ / "manifest.json", std::ios::binary) << m.dump(2) << '\n';
  }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

Config base_config(const Common& c) { return c.config.empty() ? Config{} : load_config(c.config); }

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json sweep_json(const SweepRecord& r) {
  json d{{"sweep", r.sweep}, {"side", to_string(r.side)}, {"signature", to_string(r.detection.kind)}};
  d["sample"] = r.detection.sample ? json(*r.detection.sample) : json(nullptr);
  return d;
}

struct FreeFlexArgs {
  std::string orientation;
  std::string preload = "config";
  std::string finger;
  std::optional<double> x_end;
};

int cmd_free_flex(const Common& c, const FreeFlexArgs& a, const std::vector<std::string>& argv) {
  Config cfg = base_config(c);
  HandModel& h = cfg.hand;
  if (a.orientation == "palm-down") h.orientation = HandOrientation::palm_down();
  else if (a.orientation == "palm-sideways") h.orientation = HandOrientation::palm_sideways();
  std::size_t i = 0;
  if (a.finger.empty()) {
    while (i + 1 < h.size() && h.fingers[i].single_joint()) ++i;
  } else {
    while (i < h.size() && h.fingers[i].name != a.finger) ++i;
    if (i == h.size()) throw ConfigError("--finger", 0, "no finger named '" + a.finger + "'");
  }
  FingerParams p = h.fingers[i];
  if (a.preload == "late") {
    p.theta_pre1 = deg2rad(36.0);
    p.theta_pre2 = deg2rad(32.0);
  } else if (a.preload == "early") {
    p.theta_pre1 = deg2rad(28.0);
    p.theta_pre2 = deg2rad(12.0);
  }
  const double limit = free_flexion_limit(p, h.sea);
  const double x_end = a.x_end ? std::min(*a.x_end, limit) : limit;
  std::vector<double> grid;
  if (x_end > 0.0) grid = excursion_grid(x_end, cfg.solver.excursion_step);
  while (!grid.empty() && grid.back() >= limit - 1e-9) grid.pop_back();
  const Trajectory t = free_flexion_profile(grid, p, h.sea, h.finger_orientation(i), cfg.solver);
  const ActuationSummary s = summarize_actuation(t);

  Outputs out(c);
  out.write("trajectory." + c.format, [&](std::ostream& os) {
    if (c.format == "json") write_trajectory_json(os, t);
    else write_trajectory_csv(os, t);
  });
  auto deg = [](const std::optional<double>& v) { return v ? json(rad2deg(*v)) : json(nullptr); };
  out.json_file("summary.json", {{"finger", p.name},
                                 {"preload_deg", {rad2deg(p.theta_pre1), rad2deg(p.theta_pre2)}},
                                 {"samples", t.size()},
                                 {"max_tension_N", s.max_tension},
                                 {"sequence", s.order},
                                 {"mcp_onset_mm", opt(s.mcp_onset_x)},
                                 {"pip_onset_mm", opt(s.pip_onset_x)},
                                 {"mcp_at_pip_onset_deg", deg(s.mcp_at_pip_onset)},
                                 {"near_simultaneous", s.near_simultaneous}});
  out.manifest("free-flex", c, argv);
  std::cout << p.name << ": " << t.size() << " states, " << s.order
            << (s.near_simultaneous ? " (near-simultaneous)" : "") << ", max tension "
            << s.max_tension << " N\n";
  return kOk;
}

int cmd_grasp(const Common& c, const std::vector<std::string>& argv) {
  const Config cfg = base_config(c);
  GraspScenario sc = load_scenario(c.scenario, cfg);
  sc.setup.noise.seed = c.seed;
  Outputs out(c);
  GraspOutcome g;
  try {
    g = run_grasp(sc.setup);
  } catch (const std::exception& e) {
    out.json_file("failure.json", {{"scenario", sc.name}, {"stage", "simulation"}, {"error", e.what()}});
    out.manifest("grasp", c, argv);
    std::cerr << "scenario infeasible: " << e.what() << '\n';
    return kInfeasible;
  }

  json fingers = json::array();
  for (std::size_t i = 0; i < g.names.size(); ++i) {
    const std::string& n = g.names[i];
    out.write("signal_" + n + ".csv", [&](std::ostream& os) { write_signal_csv(os, g.measured[i]); });
    out.write("signal_" + n + ".json",
              [&](std::ostream& os) { write_signal_annotation(os, g.measured[i]); });
    out.write("detection_" + n + ".json", [&](std::ostream& os) {
      write_detection_report(os, g.events[i], g.slopes[i], g.stiffness[i]);
    });
    fingers.push_back({{"finger", n},
                       {"phase", to_string(g.phases[i])},
                       {"events", g.events[i].size()},
                       {"stiffness", g.stiffness[i] ? json(to_string(*g.stiffness[i])) : json(nullptr)}});
  }
  out.write("control_log.jsonl", [&](std::ostream& os) { write_control_log(os, g.log, g.names); });
  double shift = 0.0;
  for (double v : g.object_trace) shift = std::max(shift, std::abs(v));

  json summary{{"scenario", sc.name},
               {"end_reason", g.end_reason},
               {"fault", g.fault ? json(*g.fault) : json(nullptr)},
               {"object_max_displacement_mm", shift},
               {"fingers", fingers}};
  int code = kOk;
  try {
    const PostureSnapshot ps = posture_snapshot(g, sc.setup.hand, sc.setup.detector);
    out.write("posture." + c.format, [&](std::ostream& os) {
      if (c.format == "json") write_posture_json(os, ps);
      else write_posture_csv(os, ps);
    });
  } catch (const NotReadyError& e) {
    summary["posture"] = std::string("not ready: ") + e.what();
    if (!g.fault) code = kInfeasible;
  }
  if (g.fault) code = kFault;
  out.json_file("summary.json", summary);
  out.manifest("grasp", c, argv);
  std::cout << sc.name << ": " << g.end_reason;
  for (std::size_t i = 0; i < g.names.size(); ++i)
    std::cout << ", " << g.names[i] << ' ' << to_string(g.phases[i]);
  std::cout << '\n';
  if (g.fault) std::cerr << "detection fault: " << *g.fault << '\n';
  return code;
}

RecognitionSetup recognition_setup(const Config& cfg) {
  RecognitionSetup s;
  s.hand = cfg.hand;
  s.solver = cfg.solver;
  s.detector = cfg.detector;
  s.control = cfg.control;
  return s;
}

LabeledDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, 0, "cannot open dataset");
  try {
    return read_dataset_csv(in);
  } catch (const ParameterError& e) {
    throw ConfigError(path, 0, e.what());
  }
}

int cmd_dataset(const Common& c, std::size_t trials, unsigned threads,
                const std::vector<std::string>& argv) {
  const RecognitionSetup s = recognition_setup(base_config(c));
  const LabeledDataset d = generate_dataset(object_catalog(), s, trials, c.seed, threads);
  Outputs out(c);
  out.write("dataset.csv", [&](std::ostream& os) { write_dataset_csv(os, d, s.hand); });
  out.manifest("dataset", c, argv);
  std::cout << d.size() << " samples, " << d.counts().size() << " labels\n";
  return kOk;
}

int cmd_classify(const Common& c, const std::string& dataset, const std::string& query,
                 std::size_t k, bool l2o, const std::vector<std::string>& argv) {
  const LabeledDataset d = load_dataset(dataset);
  Outputs out(c);
  json rep;
  rep["dataset"] = dataset;
  rep["k"] = k;
  if (l2o) {
    const LeaveOutReport r = leave_two_out(d, k);
    rep["leave_two_out"] = {{"correct", r.correct}, {"total", r.total}, {"accuracy", r.accuracy()}};
    std::cout << "leave-2-out " << r.correct << '/' << r.total << '\n';
  }
  if (!query.empty()) {
    const LabeledDataset q = load_dataset(query);
    json rows = json::array();
    for (const LabeledSample& s : q.samples) {
      const KnnResult r = knn_classify(s.f, d, k);
      rows.push_back({{"given", s.label}, {"label", r.label}, {"votes", r.votes}, {"neighbors", r.neighbors}});
      std::cout << s.label << " -> " << r.label << " (" << r.votes << '/' << k << ")\n";
    }
    rep["queries"] = rows;
  }
  out.json_file("classification.json", rep);
  out.manifest("classify", c, argv);
  return kOk;
}

int cmd_blind(const Common& c, const std::string& dataset, const std::vector<std::string>& argv) {
  const RecognitionSetup s = recognition_setup(base_config(c));
  const LabeledDataset d = load_dataset(dataset);
  const SceneFile scene = load_scene(c.scenario);
  BlindResult r;
  try {
    r = blind_sweep(scene.scene, object_catalog(), d, s, scene.sweep, c.seed);
  } catch (const ParameterError& e) {
    Outputs out(c);
    out.json_file("failure.json", {{"stage", "sweep"}, {"error", e.what()}});
    out.manifest("blind", c, argv);
    std::cerr << "scenario infeasible: " << e.what() << '\n';
    return kInfeasible;
  }
  json rep;
  rep["found"] = r.found;
  rep["sweeps"] = json::array();
  for (const SweepRecord& w : r.sweeps) rep["sweeps"].push_back(sweep_json(w));
  rep["side"] = r.side ? json(to_string(*r.side)) : json(nullptr);
  rep["position_mm"] = opt(r.position);
  rep["approach"] = r.approach;
  rep["truth_label"] = r.truth_label;
  if (r.grasp) {
    rep["grasp"] = {{"end_reason", r.grasp->end_reason},
                    {"fault", r.grasp->fault ? json(*r.grasp->fault) : json(nullptr)}};
    json phases = json::array();
    for (FingerPhase p : r.grasp->phases) phases.push_back(to_string(p));
    rep["grasp"]["phases"] = phases;
  }
  if (r.features) {
    json f = json::array();
    for (std::size_t j = 0; j + 1 < kFeatureDim; ++j) f.push_back(rad2deg(r.features->v[j]));
    f.push_back(r.features->slope());
    rep["features"] = f;
  }
  if (r.result)
    rep["prediction"] = {{"label", r.result->label},
                         {"votes", r.result->votes},
                         {"k", r.result->k},
                         {"confidence", static_cast<double>(r.result->votes) / r.result->k}};
  Outputs out(c);
  out.json_file("blind.json", rep);
  out.manifest("blind", c, argv);
  if (!r.found) std::cout << "no object found in " << r.sweeps.size() << " sweeps\n";
  else
    std::cout << "contact on " << to_string(*r.side) << " side at " << *r.position << " mm, "
              << (r.result ? r.result->label : std::string("no prediction")) << '\n';
  if (r.grasp && r.grasp->fault) return kFault;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Proprioceptive soft finger simulator"};
  app.require_subcommand(1);
  std::vector<std::string> args(argv, argv + argc);

  Common c;
  auto common = [&c](CLI::App* s, bool scenario) {
    s->add_option("--config", c.config, "Parameter file (TOML)")->check(CLI::ExistingFile);
    if (scenario) s->add_option("--scenario", c.scenario, "Scenario or scene file (TOML)")->required();
    s->add_option("--seed", c.seed, "Seed for noise and jitter");
    s->add_option("--out", c.out, "Output directory");
    s->add_option("--format", c.format, "Table format")->check(CLI::IsMember({"csv", "json"}));
  };

  FreeFlexArgs ff;
  CLI::App* free_flex = app.add_subcommand("free-flex", "Free-flexion trajectory of one finger");
  common(free_flex, false);
  free_flex->add_option("--orientation", ff.orientation)->check(CLI::IsMember({"palm-sideways", "palm-down"}));
  free_flex->add_option("--preload", ff.preload, "Spring preloads: config, late (36/32 deg) or early (28/12 deg)")
      ->check(CLI::IsMember({"config", "late", "early"}));
  free_flex->add_option("--finger", ff.finger, "Finger name (default: first two-joint finger)");
  free_flex->add_option("--x-end", ff.x_end, "Last excursion, mm");

  CLI::App* grasp = app.add_subcommand("grasp", "Controlled grasp of a scenario");
  common(grasp, true);

  std::size_t trials = 10;
  unsigned threads = 0;
  CLI::App* dataset = app.add_subcommand("dataset", "Grasp every catalog object and write features");
  common(dataset, false);
  dataset->add_option("--trials", trials, "Trials per object")->check(CLI::PositiveNumber);
  dataset->add_option("--threads", threads, "Worker threads, 0 = all cores");

  std::string data_path, query_path;
  std::size_t k = 3;
  bool l2o = false;
  CLI::App* classify = app.add_subcommand("classify", "k-NN classification against a dataset");
  common(classify, false);
  classify->add_option("--dataset", data_path)->required();
  classify->add_option("--query", query_path, "Feature CSV to classify");
  classify->add_option("--k", k)->check(CLI::PositiveNumber);
  classify->add_flag("--leave-two-out", l2o, "Evaluate the dataset by leave-2-out");

  CLI::App* blind = app.add_subcommand("blind", "Sweep a scene, grasp what is found and classify it");
  common(blind, true);
  blind->add_option("--dataset", data_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*free_flex) return cmd_free_flex(c, ff, args);
    if (*grasp) return cmd_grasp(c, args);
    if (*dataset) return cmd_dataset(c, trials, threads, args);
    if (*classify) return cmd_classify(c, data_path, query_path, k, l2o, args);
    if (*blind) return cmd_blind(c, data_path, args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ParameterError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "scenario infeasible: " << e.what() << '\n';
    return kInfeasible;
  }
  return kOk;
}
