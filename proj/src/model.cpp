#include "psf/model.hpp"

#include <cmath>
#include <sstream>

namespace psf {
namespace {

// Slack for bound checks on values that come out of floating-point
// arithmetic (interpolation, bisection).
constexpr double kBoundSlack = 1e-9;

void require(bool cond, const std::string& what) {
  if (!cond) throw ParameterError(what);
}

void check_rom(double theta, int joint, const FingerParams& p) {
  const double lo = p.min_angle(joint);
  const double hi = p.max_angle(joint);
  if (!(theta >= lo - kBoundSlack && theta <= hi + kBoundSlack)) {
    std::ostringstream os;
    os << p.name << ": joint " << joint << " angle " << theta << " rad outside range [" << lo
       << ", " << hi << "]";
    throw DomainError(os.str());
  }
}

}  // namespace

void SeaParams::validate() const {
  require(k_sea > 0.0, "sea.k_sea must be positive");
  require(x_sb_max > 0.0, "sea.x_sb_max must be positive");
  require(f_max > 0.0, "sea.f_max must be positive");
  require(cable_speed > 0.0, "sea.cable_speed must be positive");
  require(saturation_tension() >= f_max * (1.0 - 1e-12),
          "sea: 2*k_sea*x_sb_max must reach f_max");
}

void FingerParams::validate() const {
  const std::string pre = name + ": ";
  require(r1 > 0.0, pre + "r1 must be positive");
  require(k1 > 0.0, pre + "k1 must be positive");
  require(rom1 > 0.0 && rom1 <= kPi, pre + "rom1 must lie in (0, pi]");
  require(theta_pre1 >= 0.0 && theta_pre2 >= 0.0, pre + "preload angles must be >= 0");
  require(m1 >= 0.0 && m2 >= 0.0, pre + "masses must be >= 0");
  require(len_prox > 0.0, pre + "len_prox must be positive");
  require(theta_i1 >= 0.0 && theta_i1 < rom1, pre + "theta_i1 must lie in [0, rom1)");
  if (single_joint()) {
    require(r2 == 0.0 && m2 == 0.0 && theta_i2 == 0.0,
            pre + "single-joint finger needs r2 = m2 = theta_i2 = 0");
    return;
  }
  require(r2 > 0.0, pre + "r2 must be positive");
  require(k2 > 0.0, pre + "k2 must be positive");
  require(rom2 > 0.0 && rom2 <= kPi, pre + "rom2 must lie in (0, pi]");
  require(len_dist > 0.0, pre + "len_dist must be positive");
  require(theta_i2 >= 0.0 && theta_i2 < rom2, pre + "theta_i2 must lie in [0, rom2)");
}

double FingerParams::min_angle(int joint) const { return joint == 1 ? -theta_i1 : -theta_i2; }

double FingerParams::max_angle(int joint) const {
  return joint == 1 ? rom1 - theta_i1 : rom2 - theta_i2;
}

FingerParams FingerParams::as_single_joint() const {
  FingerParams t = *this;
  t.r2 = 0.0;
  t.rom2 = 0.0;
  t.m2 = 0.0;
  t.theta_i2 = 0.0;
  t.theta_pre2 = 0.0;
  return t;
}

void HandOrientation::validate() const {
  if (std::abs(g_dir.norm() - 1.0) > 1e-9) throw ParameterError("hand: gravity direction must be a unit vector");
  if (!(g_mag >= 0.0)) throw ParameterError("hand: gravity magnitude must be >= 0");
}

Eigen::Matrix2d joint_rotation(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Eigen::Matrix2d r;
  r << c, s, -s, c;
  return r;
}

Eigen::Matrix2d joint_rotation_derivative(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Eigen::Matrix2d r;
  r << -s, c, -c, -s;
  return r;
}

Vec2 pip_position(double theta1, const FingerParams& p) {
  return joint_rotation(p.theta_i1 + theta1) * p.l1;
}

Vec2 distal_point(double theta1, double theta2, double s, const FingerParams& p) {
  const double phi1 = p.theta_i1 + theta1;
  const double phi12 = phi1 + p.theta_i2 + theta2;
  return joint_rotation(phi1) * p.l1 + joint_rotation(phi12) * Vec2{s, 0.0};
}

Vec2 tip_position(double theta1, double theta2, const FingerParams& p) {
  return distal_point(theta1, theta2, p.single_joint() ? 0.0 : p.len_dist, p);
}

double tendon_length(double theta1, double theta2, const FingerParams& p) {
  check_rom(theta1, 1, p);
  check_rom(theta2, 2, p);
  return p.r1 * theta1 + p.r2 * theta2;
}

double sea_tension(double dx_sb, const SeaParams& s) {
  if (dx_sb < 0.0 || dx_sb > s.x_sb_max) {
    std::ostringstream os;
    os << "sliding-block displacement " << dx_sb << " mm outside [0, " << s.x_sb_max << "]";
    throw RangeError(os.str());
  }
  return 2.0 * s.k_sea * dx_sb;
}

double sea_displacement(double theta1, double theta2, double x, const FingerParams& p) {
  return (x - tendon_length(theta1, theta2, p)) / 2.0;
}

double elastic_energy(double theta1, double theta2, double x, const FingerParams& p,
                      const SeaParams& s) {
  const double dx_sb = sea_displacement(theta1, theta2, x, p);
  if (dx_sb < -kBoundSlack) {
    std::ostringstream os;
    os << "negative SEA displacement " << dx_sb << " mm: the tendon cannot push";
    throw RangeError(os.str());
  }
  const double q1 = p.theta_pre1 + theta1;
  const double q2 = p.theta_pre2 + theta2;
  return 4.0 * 0.5 * s.k_sea * dx_sb * dx_sb + 2.0 * 0.5 * p.k1 * q1 * q1 +
         2.0 * 0.5 * p.k2 * q2 * q2;
}

double gravitational_energy(double theta1, double theta2, const FingerParams& p,
                            const HandOrientation& orient) {
  check_rom(theta1, 1, p);
  check_rom(theta2, 2, p);
  const Vec2 g = orient.planar();
  if (g.isZero(0.0) || (p.m1 == 0.0 && p.m2 == 0.0)) return 0.0;
  const double phi1 = p.theta_i1 + theta1;
  const double phi12 = phi1 + p.theta_i2 + theta2;
  const Vec2 com1 = joint_rotation(phi1) * p.lc1;
  const Vec2 com2 = joint_rotation(phi1) * p.l1 + joint_rotation(phi12) * p.lc2;
  // Height is measured against gravity: h = -g_dir · r.
  return -orient.g_mag * (p.m1 * g.dot(com1) + p.m2 * g.dot(com2));
}

double total_energy(double theta1, double theta2, double x, const FingerParams& p,
                    const SeaParams& s, const HandOrientation& orient) {
  return elastic_energy(theta1, theta2, x, p, s) + gravitational_energy(theta1, theta2, p, orient);
}

Vec2 total_energy_gradient(double theta1, double theta2, double x, const FingerParams& p,
                           const SeaParams& s, const HandOrientation& orient) {
  // d/dθj of 2·k_sea·((x-ℓ)/2)² is -k_sea·(x-ℓ)·r_j.
  const double stretch = x - (p.r1 * theta1 + p.r2 * theta2);
  Vec2 grad{-s.k_sea * stretch * p.r1 + 2.0 * p.k1 * (p.theta_pre1 + theta1),
            -s.k_sea * stretch * p.r2 + 2.0 * p.k2 * (p.theta_pre2 + theta2)};

  const Vec2 g = orient.planar();
  if (!g.isZero(0.0) && (p.m1 != 0.0 || p.m2 != 0.0)) {
    const double phi1 = p.theta_i1 + theta1;
    const double phi12 = phi1 + p.theta_i2 + theta2;
    const Eigen::Matrix2d d1 = joint_rotation_derivative(phi1);
    const Eigen::Matrix2d d12 = joint_rotation_derivative(phi12);
    const double w = -orient.g_mag;
    grad.x() += w * (p.m1 * g.dot(d1 * p.lc1) + p.m2 * g.dot(d1 * p.l1 + d12 * p.lc2));
    grad.y() += w * p.m2 * g.dot(d12 * p.lc2);
  }
  if (p.single_joint()) grad.y() = 0.0;
  return grad;
}

FingerState make_state(double theta1, double theta2, double x, const FingerParams& p,
                       const SeaParams& s) {
  FingerState st;
  st.theta1 = theta1;
  st.theta2 = theta2;
  st.x = x;
  st.dx_sb = sea_displacement(theta1, theta2, x, p);
  // Round-off from the solver may leave a displacement a hair below zero.
  if (st.dx_sb < 0.0 && st.dx_sb > -kBoundSlack) st.dx_sb = 0.0;
  if (st.dx_sb > s.x_sb_max && st.dx_sb < s.x_sb_max + kBoundSlack) st.dx_sb = s.x_sb_max;
  st.tension = sea_tension(st.dx_sb, s);
  return st;
}

}  // namespace psf
