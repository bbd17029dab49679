// Quasi-static finger solver: per-step constrained energy minimization
// along an excursion schedule, and an exhaustive grid oracle.
#pragma once

#include "psf/contact.hpp"
#include "psf/model.hpp"

#include <iosfwd>
#include <stdexcept>
#include <vector>

namespace psf {

struct SolveConfig {
  double excursion_step = 28.9 / 1000.0;  // mm per step, one control sample at cable speed
  double angle_tol = 1e-10;               // rad
  int max_iter = 100;
  bool warm_start = true;

  void validate() const;
  static SolveConfig for_sea(const SeaParams& s) {
    SolveConfig c;
    c.excursion_step = s.cable_speed / 1000.0;
    return c;
  }
};

/// Raised when no admissible state exists at the requested excursion:
/// the sliding block would pass its travel limit even at full flexion.
class SaturationError : public std::runtime_error {
 public:
  SaturationError(const std::string& what, FingerState clamped)
      : std::runtime_error(what), clamped_(clamped) {}
  const FingerState& clamped() const { return clamped_; }

 private:
  FingerState clamped_;
};

/// Minimum-energy states ordered by strictly increasing excursion.
struct Trajectory {
  std::vector<FingerState> states;

  bool empty() const { return states.empty(); }
  std::size_t size() const { return states.size(); }
  double x_min() const { return states.front().x; }
  double x_max() const { return states.back().x; }

  /// Linear interpolation of every state field at excursion x (RangeError outside).
  FingerState at(double x) const;
  /// Smallest excursion at which the tendon length reaches ell (RangeError
  /// if ell exceeds the largest length on the trajectory).
  double excursion_for_length(double ell, const FingerParams& p) const;
};

/// One quasi-static step: minimize total energy plus contact penalties at
/// excursion x subject to joint ranges, SEA travel and contact constraints.
FingerState solve_step(double x, const FingerState& prev, const ContactConstraintSet& constraints,
                       const FingerParams& p, const SeaParams& s, const HandOrientation& orient,
                       const SolveConfig& cfg);

/// Uniform excursion grid 0, step, 2·step, ... up to and including x_end.
std::vector<double> excursion_grid(double x_end, double step);

/// Warm-started free-flexion trajectory over x_grid.
Trajectory free_flexion_profile(const std::vector<double>& x_grid, const FingerParams& p,
                                const SeaParams& s, const HandOrientation& orient,
                                const SolveConfig& cfg);

/// Exhaustive minimization over the feasible angle grid {lo + i·h} ∪ {hi}.
/// Ties go to the smaller theta1, then the smaller theta2.
FingerState oracle_grid_search(double x, const ContactConstraintSet& constraints,
                               const FingerParams& p, const SeaParams& s,
                               const HandOrientation& orient, double resolution);

/// Objective minimized by solve_step (total energy plus contact penalty).
double step_objective(double theta1, double theta2, double x, const ContactConstraintSet& c,
                      const FingerParams& p, const SeaParams& s, const HandOrientation& orient);

/// Gradient of step_objective projected onto the feasible directions at
/// (theta1, theta2); zero at a constrained minimizer.
double projected_gradient_norm(const FingerState& st, const ContactConstraintSet& c,
                               const FingerParams& p, const SeaParams& s,
                               const HandOrientation& orient);

/// CSV columns: x_mm, theta1_deg, theta2_deg, dx_sb_mm, tension_N.
void write_trajectory_csv(std::ostream& os, const Trajectory& t);
Trajectory read_trajectory_csv(std::istream& is);

}  // namespace psf
