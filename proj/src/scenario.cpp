#include "psf/scenario.hpp"

#include <algorithm>
#include <cmath>

namespace psf {
namespace {

// Along a phalanx at flexion angle phi, and its palmar normal.
Vec2 along(double phi) { return {std::cos(phi), -std::sin(phi)}; }
Vec2 palmar(double phi) { return {-std::sin(phi), -std::cos(phi)}; }

}  // namespace

double free_flexion_limit(const FingerParams& p, const SeaParams& s) {
  return tendon_length(p.max_angle(1), p.max_angle(2), p) + 2.0 * s.x_sb_max;
}

Trajectory reference_profile(const FingerParams& p, const SeaParams& s, const HandOrientation& o,
                             const SolveConfig& cfg) {
  std::vector<double> grid = excursion_grid(free_flexion_limit(p, s), cfg.excursion_step);
  while (!grid.empty() && grid.back() >= free_flexion_limit(p, s) - 1e-9) grid.pop_back();
  return free_flexion_profile(grid, p, s, o, cfg);
}

std::size_t pip_onset(const Trajectory& ref) {
  for (std::size_t i = 0; i < ref.size(); ++i)
    if (ref.states[i].theta2 > 1e-9) return i;
  throw RangeError("reference never flexes the PIP joint");
}

ActuationSummary summarize_actuation(const Trajectory& t) {
  ActuationSummary a;
  if (t.empty()) {
    a.order = "none";
    return a;
  }
  const FingerState& s0 = t.states.front();
  std::size_t i1 = t.size(), i2 = t.size();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const FingerState& st = t.states[i];
    a.max_tension = std::max(a.max_tension, st.tension);
    if (i1 == t.size() && st.theta1 > s0.theta1 + 1e-9) i1 = i;
    if (i2 == t.size() && st.theta2 > s0.theta2 + 1e-9) i2 = i;
  }
  if (i1 < t.size()) a.mcp_onset_x = t.states[i1].x;
  if (i2 < t.size()) {
    a.pip_onset_x = t.states[i2].x;
    a.mcp_at_pip_onset = t.states[i2].theta1;
  }
  if (i1 == t.size() && i2 == t.size()) a.order = "none";
  else if (i2 == t.size()) a.order = "mcp-only";
  else if (i1 == t.size()) a.order = "pip-only";
  else a.order = i1 <= i2 ? "mcp-then-pip" : "pip-then-mcp";
  a.near_simultaneous =
      a.mcp_at_pip_onset && *a.mcp_at_pip_onset - s0.theta1 < kNearSimultaneous;
  return a;
}

ObjectModel adaptive_placement(const Trajectory& ref, const FingerParams& p, double offset_deg,
                               double radius) {
  const double phi = ref.states[pip_onset(ref)].theta1 + p.theta_i1 + deg2rad(offset_deg);
  ObjectModel o;
  o.radius = radius;
  o.center = 30.0 * along(phi) + radius * palmar(phi);
  return o;
}

ObjectModel distal_placement(const Trajectory& ref, const FingerParams& p, double frac,
                             double radius, double back) {
  const FingerState& st =
      ref.states[static_cast<std::size_t>(frac * static_cast<double>(pip_onset(ref)))];
  const double phi = p.theta_i1 + st.theta1 + p.theta_i2 + st.theta2;
  ObjectModel o;
  o.radius = radius;
  o.center = tip_position(st.theta1, st.theta2, p) + radius * palmar(phi) - back * along(phi);
  return o;
}

PinchScenario opposed_pinch(const Trajectory& ref, const FingerParams& p, double frac,
                            double friction) {
  PinchScenario sc;
  sc.object = distal_placement(ref, p, frac);
  const Vec2 c = sc.object.center;
  // Point symmetry about the object center puts the second finger's view
  // of the object exactly where the first one sees it.
  sc.hand = opposed_pair(p, 2.0 * c.x(), -2.0 * c.y());
  sc.object.mobile = true;
  sc.object.direction = {1.0, 0.0};
  sc.object.friction = friction;
  return sc;
}

}  // namespace psf
