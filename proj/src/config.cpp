#include "psf/config.hpp"
#include "psf/scenario.hpp"

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace psf {

ConfigError::ConfigError(const std::string& source, std::size_t line, const std::string& what)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

namespace {

std::size_t line_of(const toml::node& n) { return static_cast<std::size_t>(n.source().begin.line); }

// Reads the keys of one table, remembering which were used so that typos
// surface as errors instead of silently keeping defaults.
class Section {
 public:
  Section(const toml::table& t, std::string name, const std::string& src)
      : t_(t), name_(std::move(name)), src_(src) {}

  [[noreturn]] void fail(const toml::node& n, const std::string& msg) const {
    throw ConfigError(src_, line_of(n), "[" + name_ + "] " + msg);
  }
  [[noreturn]] void fail(const std::string& msg) const { fail(t_, msg); }

  const toml::node* get(const char* key) {
    used_.insert(key);
    return t_.get(key);
  }

  void num(const char* key, double& out, double scale = 1.0) {
    if (const toml::node* n = get(key)) {
      const auto v = n->value<double>();
      if (!v || !(n->is_integer() || n->is_floating_point())) fail(*n, std::string(key) + " must be a number");
      out = *v * scale;
    }
  }
  void angle(const char* key, double& out) { num(key, out, kPi / 180.0); }

  void count(const char* key, std::size_t& out) {
    if (const toml::node* n = get(key)) {
      const auto v = n->value<std::int64_t>();
      if (!n->is_integer() || !v || *v < 0) fail(*n, std::string(key) + " must be a non-negative integer");
      out = static_cast<std::size_t>(*v);
    }
  }
  void integer(const char* key, int& out) {
    if (const toml::node* n = get(key)) {
      if (!n->is_integer()) fail(*n, std::string(key) + " must be an integer");
      out = static_cast<int>(*n->value<std::int64_t>());
    }
  }
  void flag(const char* key, bool& out) {
    if (const toml::node* n = get(key)) {
      if (!n->is_boolean()) fail(*n, std::string(key) + " must be true or false");
      out = *n->value<bool>();
    }
  }
  void text(const char* key, std::string& out) {
    if (const toml::node* n = get(key)) {
      if (!n->is_string()) fail(*n, std::string(key) + " must be a string");
      out = *n->value<std::string>();
    }
  }
  template <int N>
  void vec(const char* key, Eigen::Matrix<double, N, 1>& out) {
    if (const toml::node* n = get(key)) {
      const toml::array* a = n->as_array();
      if (!a || a->size() != N) fail(*n, std::string(key) + " must be an array of " + std::to_string(N) + " numbers");
      for (int i = 0; i < N; ++i) {
        const auto v = (*a)[static_cast<std::size_t>(i)].value<double>();
        if (!v) fail(*n, std::string(key) + " must hold numbers");
        out[i] = *v;
      }
    }
  }

  void done() const {
    for (const auto& [k, v] : t_)
      if (!used_.count(std::string(k.str()))) fail(v, "unknown key '" + std::string(k.str()) + "'");
  }

  const std::string& name() const { return name_; }

 private:
  const toml::table& t_;
  std::string name_;
  const std::string& src_;
  std::set<std::string> used_;
};

const toml::table* table_at(const toml::table& root, const char* key, const std::string& src) {
  const toml::node* n = root.get(key);
  if (!n) return nullptr;
  if (!n->is_table()) throw ConfigError(src, line_of(*n), std::string("'") + key + "' must be a table");
  return n->as_table();
}

void read_finger(Section& s, FingerParams& p, FingerMount& m) {
  bool single = p.single_joint();
  s.flag("single_joint", single);
  if (single && !p.single_joint()) p = p.as_single_joint();
  s.num("r1", p.r1);
  s.num("r2", p.r2);
  s.num("k1", p.k1);
  s.num("k2", p.k2);
  s.angle("theta_pre1", p.theta_pre1);
  s.angle("theta_pre2", p.theta_pre2);
  s.angle("theta_i1", p.theta_i1);
  s.angle("theta_i2", p.theta_i2);
  s.angle("rom1", p.rom1);
  s.angle("rom2", p.rom2);
  s.num("m1", p.m1);
  s.num("m2", p.m2);
  s.vec("lc1", p.lc1);
  s.vec("lc2", p.lc2);
  s.vec("l1", p.l1);
  s.num("len_prox", p.len_prox);
  s.num("len_dist", p.len_dist);
  s.vec("origin", m.origin);
  s.angle("heading", m.heading);
  s.flag("mirror", m.mirror);
  s.num("z", m.z);
  s.done();
}

template <class F>
void checked(const Section& s, F&& f) {
  try {
    f();
  } catch (const ParameterError& e) {
    s.fail(e.what());
  } catch (const RangeError& e) {
    s.fail(e.what());
  }
}

toml::table parse_toml(std::string_view text, const std::string& source) {
  try {
    return toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    throw ConfigError(source, static_cast<std::size_t>(e.source().begin.line),
                      std::string(e.description()));
  }
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Array of tables under `key`, each checked to be a table.
std::vector<const toml::table*> tables_at(const toml::table& root, const char* key,
                                          const std::string& src) {
  std::vector<const toml::table*> out;
  const toml::node* n = root.get(key);
  if (!n) return out;
  const toml::array* a = n->as_array();
  if (!a) throw ConfigError(src, line_of(*n), std::string("'") + key + "' must be [[" + key + "]] tables");
  for (const toml::node& e : *a) {
    if (!e.is_table()) throw ConfigError(src, line_of(e), std::string("[[") + key + "]] entries must be tables");
    out.push_back(e.as_table());
  }
  return out;
}

}  // namespace

Config parse_config(std::string_view text, const std::string& source) {
  const toml::table root = parse_toml(text, source);
  for (const auto& [k, v] : root) {
    static const std::set<std::string> known{"sea", "hand", "finger", "solver", "detector", "control"};
    if (!known.count(std::string(k.str())))
      throw ConfigError(source, line_of(v), "unknown section [" + std::string(k.str()) + "]");
  }

  Config c;
  SeaParams sea;
  if (const toml::table* t = table_at(root, "sea", source)) {
    Section s(*t, "sea", source);
    s.num("k_sea", sea.k_sea);
    s.num("x_sb_max", sea.x_sb_max);
    s.num("f_max", sea.f_max);
    s.num("cable_speed", sea.cable_speed);
    s.done();
    checked(s, [&] { sea.validate(); });
  }

  HandModel hand = default_hand();
  if (const toml::table* t = table_at(root, "hand", source)) {
    Section s(*t, "hand", source);
    std::string preset = "default";
    s.text("preset", preset);
    if (preset == "single") hand = single_finger_hand();
    else if (preset != "default") s.fail("preset must be \"default\" or \"single\"");
    std::string orient;
    s.text("orientation", orient);
    if (orient == "palm-down") hand.orientation = HandOrientation::palm_down();
    else if (orient == "palm-sideways") hand.orientation = HandOrientation::palm_sideways();
    else if (!orient.empty()) s.fail("orientation must be \"palm-sideways\" or \"palm-down\"");
    s.vec("g_dir", hand.orientation.g_dir);
    s.num("g_mag", hand.orientation.g_mag);
    s.done();
    checked(s, [&] { hand.orientation.validate(); });
  }
  hand.sea = sea;

  if (const toml::table* fingers = table_at(root, "finger", source)) {
    for (const auto& [k, v] : *fingers) {
      const std::string name(k.str());
      if (!v.is_table()) throw ConfigError(source, line_of(v), "[finger." + name + "] must be a table");
      Section s(*v.as_table(), "finger." + name, source);
      std::size_t i = 0;
      while (i < hand.size() && hand.fingers[i].name != name) ++i;
      if (i == hand.size()) {
        FingerParams p;
        p.name = name;
        hand.fingers.push_back(p);
        hand.mounts.push_back({});
      }
      read_finger(s, hand.fingers[i], hand.mounts[i]);
      checked(s, [&] { hand.fingers[i].validate(); });
    }
  }
  try {
    hand.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(source, 1, e.what());
  }
  c.hand = hand;

  c.solver = SolveConfig::for_sea(sea);
  if (const toml::table* t = table_at(root, "solver", source)) {
    Section s(*t, "solver", source);
    s.num("excursion_step", c.solver.excursion_step);
    s.num("angle_tol", c.solver.angle_tol);
    s.integer("max_iter", c.solver.max_iter);
    s.flag("warm_start", c.solver.warm_start);
    s.done();
    checked(s, [&] { c.solver.validate(); });
  }

  c.detector = DetectorConfig::for_sea(sea);
  if (const toml::table* t = table_at(root, "detector", source)) {
    Section s(*t, "detector", source);
    DetectorConfig& d = c.detector;
    s.count("window", d.window);
    s.num("rate", d.rate);
    s.num("r_prox", d.r_prox);
    s.num("r_dist", d.r_dist);
    s.num("s_load", d.s_load);
    s.num("s_rigid", d.s_rigid);
    s.num("s_instab", d.s_instab);
    s.num("slope_delay", d.slope_delay);
    s.count("filter_window", d.filter_window);
    s.count("classify_span", d.classify_span);
    s.done();
    checked(s, [&] { d.validate(sea); });
  }

  if (const toml::table* t = table_at(root, "control", source)) {
    Section s(*t, "control", source);
    ControlConfig& k = c.control;
    s.num("target_tension", k.target_tension);
    s.num("hold_deadband", k.hold_deadband);
    std::string strategy;
    s.text("strategy", strategy);
    if (!strategy.empty()) {
      try {
        k.strategy = strategy_from_string(strategy);
      } catch (const ParameterError& e) {
        s.fail(e.what());
      }
    }
    s.count("settle", k.settle);
    s.done();
    checked(s, [&] { k.validate(sea); });
  }
  return c;
}

Config load_config(const std::filesystem::path& path) {
  return parse_config(slurp(path), path.string());
}

GraspScenario parse_scenario(std::string_view text, const Config& base, const std::string& source) {
  const toml::table root = parse_toml(text, source);
  GraspScenario sc;
  GraspSetup& g = sc.setup;
  g.hand = base.hand;
  g.solver = base.solver;
  g.detector = base.detector;
  g.control = base.control;

  Section top(root, "scenario", source);
  top.text("name", sc.name);
  top.num("noise_sigma", g.noise.sigma);
  top.count("max_samples", g.sim.max_samples);
  std::string strategy;
  top.text("strategy", strategy);
  if (!strategy.empty()) checked(top, [&] { g.control.strategy = strategy_from_string(strategy); });
  std::string hand;
  top.text("hand", hand);
  if (hand == "single") {
    HandModel h = single_finger_hand();
    h.sea = g.hand.sea;
    h.orientation = g.hand.orientation;
    g.hand = h;
  } else if (!hand.empty() && hand != "config") {
    top.fail("hand must be \"config\" or \"single\"");
  }
  top.get("object");
  top.get("schedule");
  top.done();
  if (!(g.noise.sigma >= 0.0)) top.fail("noise_sigma must be non-negative");

  if (const toml::table* t = table_at(root, "object", source)) {
    Section s(*t, "object", source);
    std::string preset;
    s.text("preset", preset);
    // Placements are sized on the first two-joint finger.
    std::size_t f0 = 0;
    while (f0 + 1 < g.hand.size() && g.hand.fingers[f0].single_joint()) ++f0;
    const FingerParams p0 = g.hand.fingers[f0];
    auto ref0 = [&] { return reference_profile(p0, g.hand.sea, g.hand.finger_orientation(f0), g.solver); };
    ObjectModel o;
    double radius = 25.0, frac = 0.6, offset = 10.0, back = 3.0, friction = 1.0;
    s.num("radius", radius);
    if (preset == "distal") {
      s.num("frac", frac);
      s.num("back", back);
      checked(s, [&] { o = distal_placement(ref0(), p0, frac, radius, back); });
    } else if (preset == "adaptive") {
      s.num("offset_deg", offset);
      checked(s, [&] { o = adaptive_placement(ref0(), p0, offset, radius); });
    } else if (preset == "pinch") {
      s.num("frac", frac);
      s.num("friction", friction);
      checked(s, [&] {
        PinchScenario pin = opposed_pinch(ref0(), p0, frac, friction);
        pin.hand.sea = g.hand.sea;
        pin.hand.orientation = g.hand.orientation;
        g.hand = pin.hand;
        o = pin.object;
      });
    } else if (preset == "catalog") {
      std::string label;
      s.text("label", label);
      bool found = false;
      for (const CatalogObject& c : object_catalog())
        if (c.label == label) {
          o = c.object;
          o.center += RecognitionSetup{}.grasp_center;
          found = true;
        }
      if (!found) s.fail("unknown catalog label '" + label + "'");
    } else if (preset.empty()) {
      o.radius = radius;
      std::string shape = "cylinder";
      s.text("shape", shape);
      if (shape == "cylinder") o.shape = ObjectShape::cylinder;
      else if (shape == "cone") o.shape = ObjectShape::cone;
      else if (shape == "sphere") o.shape = ObjectShape::sphere;
      else s.fail("shape must be \"cylinder\", \"cone\" or \"sphere\"");
      s.vec("center", o.center);
      s.num("taper", o.taper);
      s.num("z_center", o.z_center);
      s.flag("mobile", o.mobile);
      s.vec("direction", o.direction);
      s.num("friction", o.friction);
      s.num("workspace", o.workspace);
    } else {
      s.fail("unknown preset '" + preset + "'");
    }
    std::string stiffness;
    s.text("stiffness", stiffness);
    if (stiffness == "soft") o.stiffness = Stiffness::soft;
    else if (stiffness == "rigid") o.stiffness = Stiffness::rigid, o.k_obj = 0.0;
    else if (!stiffness.empty()) s.fail("stiffness must be \"rigid\" or \"soft\"");
    s.num("k_obj", o.k_obj);
    s.done();
    checked(s, [&] { o.validate(); });
    g.object = o;
  }

  const auto scheds = tables_at(root, "schedule", source);
  if (!scheds.empty()) {
    for (std::size_t i = 0; i < g.hand.size(); ++i)
      g.schedules.push_back({0, free_flexion_limit(g.hand.fingers[i], g.hand.sea)});
    for (const toml::table* t : scheds) {
      Section s(*t, "schedule", source);
      std::string finger;
      double start = 0.0;
      s.text("finger", finger);
      s.num("start", start);
      std::size_t i = 0;
      while (i < g.hand.size() && g.hand.fingers[i].name != finger) ++i;
      if (i == g.hand.size()) s.fail("no finger named '" + finger + "'");
      if (!(start >= 0.0)) s.fail("start must be non-negative");
      g.schedules[i].start_sample = static_cast<std::size_t>(std::llround(start * g.sim.rate));
      s.num("x_end", g.schedules[i].x_end);
      if (!(g.schedules[i].x_end > 0.0)) s.fail("x_end must be positive");
      s.done();
    }
  }
  return sc;
}

GraspScenario load_scenario(const std::filesystem::path& path, const Config& base) {
  return parse_scenario(slurp(path), base, path.string());
}

SceneFile parse_scene(std::string_view text, const std::string& source) {
  const toml::table root = parse_toml(text, source);
  SceneFile f;
  Section top(root, "scene", source);
  top.num("length", f.scene.length);
  top.get("sweep");
  top.get("object");
  top.done();
  if (!(f.scene.length > 0.0)) top.fail("length must be positive");

  if (const toml::table* t = table_at(root, "sweep", source)) {
    Section s(*t, "sweep", source);
    SweepConfig& w = f.sweep;
    s.num("speed", w.speed);
    s.num("preload", w.preload);
    s.num("magnitude", w.magnitude);
    s.num("deadband", w.deadband);
    s.count("sensing_finger", w.sensing_finger);
    s.done();
    if (!(w.speed > 0.0 && w.preload > 0.0 && w.magnitude > 0.0 && w.deadband > 0.0))
      s.fail("speed, preload, magnitude and deadband must be positive");
  }

  const std::vector<CatalogObject> catalog = object_catalog();
  for (const toml::table* t : tables_at(root, "object", source)) {
    Section s(*t, "object", source);
    ScenePlacement pl;
    std::string side = "palmar";
    s.text("label", pl.label);
    s.num("along", pl.along);
    s.text("side", side);
    s.done();
    checked(s, [&] { pl.side = sweep_side_from_string(side); });
    if (std::none_of(catalog.begin(), catalog.end(),
                     [&](const CatalogObject& c) { return c.label == pl.label; }))
      s.fail("unknown catalog label '" + pl.label + "'");
    if (pl.along < 0.0 || pl.along > f.scene.length) s.fail("along must lie on the sweep line");
    f.scene.objects.push_back(pl);
  }
  return f;
}

SceneFile load_scene(const std::filesystem::path& path) {
  return parse_scene(slurp(path), path.string());
}

}  // namespace psf
