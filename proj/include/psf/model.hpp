// Physical model of a tendon-driven underactuated finger with a series
// elastic actuator (SEA).
//
// Units are fixed throughout the library: N, mm, rad, kg and N·mm for
// energy. Gravitational acceleration is expressed in N/kg so that
// m·g·(height in mm) is already in N·mm.
#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace psf {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

inline constexpr double kStandardGravity = 9.80665;  // N/kg
inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Thrown when a joint angle lies outside its range of motion.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Thrown when an SEA displacement leaves [0, x_sb_max].
class RangeError : public std::range_error {
 public:
  using std::range_error::range_error;
};

/// Thrown when a parameter set violates its invariants.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Series elastic actuator constants.
///
/// The cable runs through a two-to-one moving pulley on a sliding block
/// backed by four parallel springs, so cable tension is 2·k_sea·Δx_sb.
struct SeaParams {
  double k_sea = 8.0;            // one spring, N/mm
  double x_sb_max = 49.0 / 16.0;  // sliding-block travel, mm
  double f_max = 49.0;           // tension ceiling, N
  double cable_speed = 28.9;     // mm/s

  void validate() const;
  /// Tension produced at full sliding-block travel.
  double saturation_tension() const { return 2.0 * k_sea * x_sb_max; }
};

/// Geometric, elastic and inertial constants of one finger.
///
/// Joint 1 is the MCP joint, joint 2 the PIP joint. A thumb is described
/// as a single-joint finger with r2 = rom2 = m2 = 0.
struct FingerParams {
  std::string name = "finger";
  double r1 = 8.0;  // tendon moment arm at MCP, mm/rad
  double r2 = 6.0;  // tendon moment arm at PIP, mm/rad
  // Per-spring torsional constants; each joint carries two springs.
  double k1 = 12.5;  // N·mm/rad
  double k2 = 30.0;  // N·mm/rad
  double theta_pre1 = deg2rad(36.0);
  double theta_pre2 = deg2rad(32.0);
  double theta_i1 = 0.0;
  double theta_i2 = 0.0;
  double rom1 = kPi / 2.0;
  double rom2 = kPi / 2.0;
  double m1 = 0.010;  // kg
  double m2 = 0.008;  // kg
  Vec2 lc1{22.5, 0.0};
  Vec2 lc2{15.0, 0.0};
  Vec2 l1{45.0, 0.0};
  double len_prox = 45.0;
  double len_dist = 35.0;

  void validate() const;
  bool single_joint() const { return rom2 == 0.0; }

  /// Lowest and highest admissible relative angle of joint j (1 or 2).
  double min_angle(int joint) const;
  double max_angle(int joint) const;

  /// Single-joint (thumb) variant of this finger.
  FingerParams as_single_joint() const;
};

/// Gravity direction expressed in the finger frame.
///
/// The finger flexes in its local x-y plane (x along the extended finger,
/// -y toward the palm side). Only the in-plane part of g_dir contributes
/// to the potential energy; a palm facing sideways puts gravity along z.
struct HandOrientation {
  Vec3 g_dir{0.0, 0.0, 1.0};
  double g_mag = kStandardGravity;

  static HandOrientation palm_sideways() { return {}; }
  static HandOrientation palm_down() { return {Vec3{0.0, -1.0, 0.0}, kStandardGravity}; }

  void validate() const;
  Vec2 planar() const { return {g_dir.x(), g_dir.y()}; }
};

/// Quasi-static finger configuration at one excursion.
struct FingerState {
  double theta1 = 0.0;
  double theta2 = 0.0;
  double x = 0.0;
  double dx_sb = 0.0;
  double tension = 0.0;
};

/// Clockwise (flexion-positive) planar rotation.
Eigen::Matrix2d joint_rotation(double angle);
/// Derivative of joint_rotation with respect to its angle.
Eigen::Matrix2d joint_rotation_derivative(double angle);

/// Positions of the PIP joint and fingertip in the finger frame (MCP at the origin).
Vec2 pip_position(double theta1, const FingerParams& p);
Vec2 tip_position(double theta1, double theta2, const FingerParams& p);
/// Point on the distal phalanx at arc length s from the PIP joint.
Vec2 distal_point(double theta1, double theta2, double s, const FingerParams& p);

/// Tendon length consumed by the joints, ℓ = r1·θ1 + r2·θ2.
double tendon_length(double theta1, double theta2, const FingerParams& p);

/// Cable tension from sliding-block displacement (two-to-one pulley).
double sea_tension(double dx_sb, const SeaParams& s);

/// Sliding-block displacement (x - ℓ)/2 for given angles and excursion.
double sea_displacement(double theta1, double theta2, double x, const FingerParams& p);

/// SEA spring energy plus the two torsional spring pairs.
double elastic_energy(double theta1, double theta2, double x, const FingerParams& p,
                      const SeaParams& s);

/// Gravitational potential of both phalanges.
double gravitational_energy(double theta1, double theta2, const FingerParams& p,
                            const HandOrientation& orient);

double total_energy(double theta1, double theta2, double x, const FingerParams& p,
                    const SeaParams& s, const HandOrientation& orient);

/// Analytic gradient of total_energy with respect to (theta1, theta2).
Vec2 total_energy_gradient(double theta1, double theta2, double x, const FingerParams& p,
                           const SeaParams& s, const HandOrientation& orient);

/// Builds a state from angles and excursion; tension goes through sea_tension.
FingerState make_state(double theta1, double theta2, double x, const FingerParams& p,
                       const SeaParams& s);

}  // namespace psf
