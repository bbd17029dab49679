// Standard single-finger placements used by tests, the CLI and the
// acceptance suite.
#pragma once

#include "psf/model.hpp"
#include "psf/sim.hpp"
#include "psf/solver.hpp"

#include <optional>
#include <string>

namespace psf {

/// Largest excursion a free finger reaches before the SEA saturates.
double free_flexion_limit(const FingerParams& p, const SeaParams& s);

/// Free-flexion reference over [0, free_flexion_limit).
Trajectory reference_profile(const FingerParams& p, const SeaParams& s, const HandOrientation& o,
                             const SolveConfig& cfg);

/// First reference sample at which the PIP joint has left its stop.
std::size_t pip_onset(const Trajectory& ref);

/// Cylinder that the proximal phalanx meets at MCP angle
/// (MCP at PIP onset + offset), 30 mm out from the MCP; the finger wraps it.
ObjectModel adaptive_placement(const Trajectory& ref, const FingerParams& p, double offset_deg,
                               double radius = 25.0);

/// Cylinder that only the fingertip pad meets, at reference sample
/// frac·pip_onset, `back` mm behind the tip.
ObjectModel distal_placement(const Trajectory& ref, const FingerParams& p, double frac,
                             double radius = 25.0, double back = 3.0);

/// Actuation order along a free-flexion trajectory.
struct ActuationSummary {
  double max_tension = 0.0;                // N
  std::optional<double> mcp_onset_x;       // mm, first MCP motion
  std::optional<double> pip_onset_x;       // mm, first PIP motion
  std::optional<double> mcp_at_pip_onset;  // rad
  std::string order;  // "mcp-then-pip", "pip-then-mcp", "mcp-only", "pip-only", "none"
  // MCP had moved less than kNearSimultaneous when the PIP started.
  bool near_simultaneous = false;
};

inline constexpr double kNearSimultaneous = 20.0 * kPi / 180.0;

ActuationSummary summarize_actuation(const Trajectory& t);

struct PinchScenario {
  HandModel hand;
  ObjectModel object;
};

/// Two fingers facing each other across a cylinder that slides along the
/// hand x axis; each fingertip meets it as in distal_placement(frac).
PinchScenario opposed_pinch(const Trajectory& ref, const FingerParams& p, double frac = 1.3,
                            double friction = 1.0);

}  // namespace psf
