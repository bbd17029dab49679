#include "psf/solver.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

namespace psf {
namespace {

constexpr double kFeasTol = 1e-12;
constexpr double kFdStep = 1e-6;

// a·θ ≤ b
struct Halfplane {
  Vec2 a;
  double b;
  bool permanent = false;
};

struct Bounds {
  Vec2 lo;
  Vec2 hi;
};

Bounds joint_bounds(const FingerParams& p, const ContactConstraintSet& c) {
  Bounds bx{{p.min_angle(1), p.min_angle(2)}, {p.max_angle(1), p.max_angle(2)}};
  if (c.mcp_limit) bx.hi.x() = std::max(bx.lo.x(), std::min(bx.hi.x(), *c.mcp_limit));
  if (c.fixed1) bx.lo.x() = bx.hi.x() = std::clamp(*c.fixed1, bx.lo.x(), bx.hi.x());
  if (c.fixed2) bx.lo.y() = bx.hi.y() = std::clamp(*c.fixed2, bx.lo.y(), bx.hi.y());
  return bx;
}

double length_of(const Vec2& th, const FingerParams& p) { return p.r1 * th.x() + p.r2 * th.y(); }

FingerState clamped_state(const Vec2& th, double x, const FingerParams& p, const SeaParams& s) {
  FingerState st;
  st.theta1 = th.x();
  st.theta2 = th.y();
  st.x = x;
  st.dx_sb = std::min(std::max((x - length_of(th, p)) / 2.0, 0.0), s.x_sb_max);
  st.tension = 2.0 * s.k_sea * st.dx_sb;
  return st;
}

[[noreturn]] void throw_saturation(const Vec2& th, double x, const FingerParams& p,
                                   const SeaParams& s) {
  std::ostringstream os;
  os << p.name << ": excursion " << x << " mm saturates the SEA (sliding block beyond "
     << s.x_sb_max << " mm at the flexion limit)";
  throw SaturationError(os.str(), clamped_state(th, x, p, s));
}

std::vector<Halfplane> build_constraints(double x, const Bounds& bx, const FingerParams& p,
                                         const SeaParams& s) {
  std::vector<Halfplane> hs;
  for (int j = 0; j < 2; ++j) {
    Vec2 e = Vec2::Zero();
    e[j] = 1.0;
    if (bx.lo[j] == bx.hi[j]) {
      hs.push_back({e, bx.hi[j], true});
      continue;
    }
    hs.push_back({-e, -bx.lo[j], false});
    hs.push_back({e, bx.hi[j], false});
  }
  const Vec2 r{p.r1, p.r2};
  hs.push_back({r, x, false});                        // dx_sb ≥ 0
  hs.push_back({-r, 2.0 * s.x_sb_max - x, false});   // dx_sb ≤ x_sb_max
  return hs;
}

Vec2 objective_gradient(const Vec2& th, double x, const ContactConstraintSet& c,
                        const FingerParams& p, const SeaParams& s, const HandOrientation& o) {
  Vec2 g = total_energy_gradient(th.x(), th.y(), x, p, s, o);
  if (!c.soft.empty()) g += contact_penalty_gradient(th.x(), th.y(), p, c);
  if (p.single_joint()) g.y() = 0.0;
  return g;
}

Eigen::Matrix2d objective_hessian(const Vec2& th, double x, const ContactConstraintSet& c,
                                  const FingerParams& p, const SeaParams& s,
                                  const HandOrientation& o) {
  Eigen::Matrix2d h;
  for (int j = 0; j < 2; ++j) {
    Vec2 e = Vec2::Zero();
    e[j] = kFdStep;
    h.col(j) = (objective_gradient(th + e, x, c, p, s, o) - objective_gradient(th - e, x, c, p, s, o)) /
               (2.0 * kFdStep);
  }
  return 0.5 * (h + h.transpose());
}

// Moves th into the feasible set: box first, then along the segment toward
// lo (too much tendon) or toward hi (too little).
Vec2 feasible_start(Vec2 th, double x, const Bounds& bx, const FingerParams& p,
                    const SeaParams& s) {
  th = th.cwiseMax(bx.lo).cwiseMin(bx.hi);
  const double ell = length_of(th, p);
  if (ell > x) {
    const double ell_lo = length_of(bx.lo, p);
    const double t = (x - ell_lo) / (ell - ell_lo);
    th = bx.lo + t * (th - bx.lo);
  } else if (ell < x - 2.0 * s.x_sb_max) {
    const double ell_hi = length_of(bx.hi, p);
    const double t = (x - 2.0 * s.x_sb_max - ell) / (ell_hi - ell);
    th = th + t * (bx.hi - th);
  }
  return th.cwiseMax(bx.lo).cwiseMin(bx.hi);
}

Vec2 perp_unit(const Vec2& a) { return Vec2{-a.y(), a.x()}.normalized(); }

// Lagrange multipliers for g + Σ λ_i a_i = 0 over the working set.
std::vector<double> multipliers(const Vec2& g, const std::vector<Halfplane>& hs,
                                const std::vector<int>& w) {
  if (w.size() == 1) {
    const Vec2& a = hs[w[0]].a;
    return {-a.dot(g) / a.squaredNorm()};
  }
  Eigen::Matrix2d m;
  m.col(0) = hs[w[0]].a;
  m.col(1) = hs[w[1]].a;
  const Vec2 lam = m.fullPivLu().solve(-g);
  return {lam.x(), lam.y()};
}

bool independent(const Vec2& a, const Vec2& b) {
  return std::abs(a.x() * b.y() - a.y() * b.x()) > 1e-12 * a.norm() * b.norm();
}

}  // namespace

void SolveConfig::validate() const {
  if (!(excursion_step > 0.0)) throw ParameterError("solver.excursion_step must be positive");
  if (!(angle_tol > 0.0)) throw ParameterError("solver.angle_tol must be positive");
  if (max_iter < 1) throw ParameterError("solver.max_iter must be at least 1");
}

double step_objective(double theta1, double theta2, double x, const ContactConstraintSet& c,
                      const FingerParams& p, const SeaParams& s, const HandOrientation& orient) {
  double e = total_energy(theta1, theta2, x, p, s, orient);
  if (!c.soft.empty()) e += contact_penalty(theta1, theta2, p, c);
  return e;
}

FingerState solve_step(double x, const FingerState& prev, const ContactConstraintSet& constraints,
                       const FingerParams& p, const SeaParams& s, const HandOrientation& orient,
                       const SolveConfig& cfg) {
  if (x < 0.0) throw DomainError(p.name + ": negative tendon excursion");
  const Bounds bx = joint_bounds(p, constraints);

  if (constraints.pinned) {
    const Vec2 th = *constraints.pinned;
    const double dx = (x - length_of(th, p)) / 2.0;
    if (dx > s.x_sb_max + 1e-9) throw_saturation(th, x, p, s);
    return make_state(th.x(), th.y(), x, p, s);
  }
  if (x - length_of(bx.hi, p) > 2.0 * s.x_sb_max + kFeasTol) throw_saturation(bx.hi, x, p, s);

  const std::vector<Halfplane> hs = build_constraints(x, bx, p, s);
  const Vec2 seed = cfg.warm_start ? Vec2{prev.theta1, prev.theta2} : Vec2::Zero();
  Vec2 th = feasible_start(seed, x, bx, p, s);

  std::vector<int> work;
  for (int i = 0; i < static_cast<int>(hs.size()); ++i) {
    if (hs[i].permanent) {
      work.push_back(i);
      th[hs[i].a.x() != 0.0 ? 0 : 1] = hs[i].b;
    }
  }

  auto f = [&](const Vec2& t) { return step_objective(t.x(), t.y(), x, constraints, p, s, orient); };
  double fval = f(th);

  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    const Vec2 g = objective_gradient(th, x, constraints, p, s, orient);
    const Eigen::Matrix2d h = objective_hessian(th, x, constraints, p, s, orient);

    Vec2 d = Vec2::Zero();
    if (work.empty()) {
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(h);
      Vec2 ev = eig.eigenvalues();
      const double floor = 1e-6 * std::max(1.0, ev.cwiseAbs().maxCoeff());
      ev = ev.cwiseMax(floor);
      d = -eig.eigenvectors() * ev.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose() * g;
    } else if (work.size() == 1) {
      const Vec2 z = perp_unit(hs[work[0]].a);
      const double curv = z.dot(h * z);
      const double zg = z.dot(g);
      d = -(curv > 1e-9 ? zg / curv : zg) * z;
    }

    if (d.norm() < cfg.angle_tol) {
      if (work.empty()) break;
      const std::vector<double> lam = multipliers(g, hs, work);
      int drop = -1;
      double most_negative = -1e-10;
      for (std::size_t k = 0; k < work.size(); ++k) {
        if (!hs[work[k]].permanent && lam[k] < most_negative) {
          most_negative = lam[k];
          drop = static_cast<int>(k);
        }
      }
      if (drop < 0) break;
      work.erase(work.begin() + drop);
      continue;
    }

    double alpha_max = 1.0;
    int blocking = -1;
    for (int i = 0; i < static_cast<int>(hs.size()); ++i) {
      if (std::find(work.begin(), work.end(), i) != work.end()) continue;
      const double ad = hs[i].a.dot(d);
      if (ad <= 0.0) continue;
      const double room = std::max(hs[i].b - hs[i].a.dot(th), 0.0);
      if (room / ad < alpha_max) {
        alpha_max = room / ad;
        blocking = i;
      }
    }

    double alpha = alpha_max;
    double ftrial = f(th + alpha * d);
    const double slope = g.dot(d);
    while (alpha > 0.0 && ftrial > fval + 1e-4 * alpha * slope) {
      alpha *= 0.5;
      if (alpha < 1e-14) {
        alpha = 0.0;
        ftrial = fval;
        break;
      }
      ftrial = f(th + alpha * d);
    }

    const Vec2 step = alpha * d;
    th += step;
    fval = ftrial;
    if (blocking >= 0 && alpha == alpha_max) {
      const Halfplane& hb = hs[blocking];
      const bool fits = work.empty() || (work.size() == 1 && independent(hs[work[0]].a, hb.a));
      if (fits) {
        work.push_back(blocking);
        if (hb.a.y() == 0.0) th.x() = hb.b / hb.a.x();
        if (hb.a.x() == 0.0) th.y() = hb.b / hb.a.y();
        fval = f(th);
      }
      continue;
    }
    if (alpha == 0.0 || step.norm() < cfg.angle_tol) break;
  }

  return make_state(th.x(), th.y(), x, p, s);
}

double projected_gradient_norm(const FingerState& st, const ContactConstraintSet& c,
                               const FingerParams& p, const SeaParams& s,
                               const HandOrientation& orient) {
  const Bounds bx = joint_bounds(p, c);
  const std::vector<Halfplane> hs = build_constraints(st.x, bx, p, s);
  const Vec2 th{st.theta1, st.theta2};
  const Vec2 g = objective_gradient(th, st.x, c, p, s, orient);

  std::vector<int> active;
  for (int i = 0; i < static_cast<int>(hs.size()); ++i) {
    const double scale = 1.0 + std::abs(hs[i].b);
    if (hs[i].permanent || hs[i].b - hs[i].a.dot(th) <= 1e-9 * scale) active.push_back(i);
  }

  // min ‖g + Σ λ_i a_i‖ over λ ≥ 0; at most two multipliers matter in the plane.
  double best = g.norm();
  for (std::size_t i = 0; i < active.size(); ++i) {
    const Halfplane& hi = hs[active[i]];
    const double li = -hi.a.dot(g) / hi.a.squaredNorm();
    if (li >= 0.0 || hi.permanent) best = std::min(best, (g + li * hi.a).norm());
    for (std::size_t j = i + 1; j < active.size(); ++j) {
      const Halfplane& hj = hs[active[j]];
      if (!independent(hi.a, hj.a)) continue;
      std::vector<int> pair{active[i], active[j]};
      const std::vector<double> lam = multipliers(g, hs, pair);
      const bool ok = (lam[0] >= 0.0 || hi.permanent) && (lam[1] >= 0.0 || hj.permanent);
      if (ok) best = 0.0;
    }
  }
  return best;
}

std::vector<double> excursion_grid(double x_end, double step) {
  if (!(step > 0.0)) throw ParameterError("excursion step must be positive");
  std::vector<double> xs;
  if (x_end < 0.0) return xs;
  const auto n = static_cast<std::size_t>(std::floor(x_end / step + 1e-9));
  xs.reserve(n + 1);
  for (std::size_t i = 0; i <= n; ++i) xs.push_back(static_cast<double>(i) * step);
  return xs;
}

Trajectory free_flexion_profile(const std::vector<double>& x_grid, const FingerParams& p,
                                const SeaParams& s, const HandOrientation& orient,
                                const SolveConfig& cfg) {
  Trajectory t;
  t.states.reserve(x_grid.size());
  const ContactConstraintSet none;
  FingerState prev;
  for (std::size_t i = 0; i < x_grid.size(); ++i) {
    if (i > 0 && !(x_grid[i] > x_grid[i - 1]))
      throw ParameterError("excursion grid must be strictly increasing");
    prev = solve_step(x_grid[i], prev, none, p, s, orient, cfg);
    t.states.push_back(prev);
  }
  return t;
}

FingerState Trajectory::at(double x) const {
  if (states.empty() || x < x_min() - 1e-12 || x > x_max() + 1e-12) {
    std::ostringstream os;
    os << "excursion " << x << " mm outside reference range";
    throw RangeError(os.str());
  }
  auto it = std::lower_bound(states.begin(), states.end(), x,
                             [](const FingerState& st, double v) { return st.x < v; });
  if (it == states.begin()) return states.front();
  if (it == states.end()) return states.back();
  const FingerState& b = *it;
  const FingerState& a = *(it - 1);
  if (b.x == x) return b;
  const double w = (x - a.x) / (b.x - a.x);
  FingerState out;
  out.x = x;
  out.theta1 = a.theta1 + w * (b.theta1 - a.theta1);
  out.theta2 = a.theta2 + w * (b.theta2 - a.theta2);
  out.dx_sb = a.dx_sb + w * (b.dx_sb - a.dx_sb);
  out.tension = a.tension + w * (b.tension - a.tension);
  return out;
}

double Trajectory::excursion_for_length(double ell, const FingerParams& p) const {
  if (states.empty()) throw RangeError("empty reference trajectory");
  auto len = [&](const FingerState& st) { return p.r1 * st.theta1 + p.r2 * st.theta2; };
  if (ell <= len(states.front())) return states.front().x;
  for (std::size_t i = 1; i < states.size(); ++i) {
    const double l1 = len(states[i]);
    if (l1 >= ell) {
      const double l0 = len(states[i - 1]);
      if (l1 == l0) return states[i].x;
      const double w = (ell - l0) / (l1 - l0);
      return states[i - 1].x + w * (states[i].x - states[i - 1].x);
    }
  }
  std::ostringstream os;
  os << "tendon length " << ell << " mm beyond reference range";
  throw RangeError(os.str());
}

FingerState oracle_grid_search(double x, const ContactConstraintSet& constraints,
                               const FingerParams& p, const SeaParams& s,
                               const HandOrientation& orient, double resolution) {
  if (!(resolution > 0.0)) throw ParameterError("oracle resolution must be positive");
  const Bounds bx = joint_bounds(p, constraints);
  if (constraints.pinned) {
    const Vec2 th = *constraints.pinned;
    const double dx = (x - length_of(th, p)) / 2.0;
    if (dx < -kFeasTol || dx > s.x_sb_max + kFeasTol) throw_saturation(th, x, p, s);
    return make_state(th.x(), th.y(), x, p, s);
  }

  auto axis = [&](double lo, double hi) {
    std::vector<double> v;
    for (std::size_t i = 0;; ++i) {
      const double t = lo + static_cast<double>(i) * resolution;
      if (t >= hi - 1e-12) break;
      v.push_back(t);
    }
    v.push_back(hi);
    return v;
  };
  const std::vector<double> a1 = axis(bx.lo.x(), bx.hi.x());
  const std::vector<double> a2 = axis(bx.lo.y(), bx.hi.y());

  // Energy is re-derived here term by term rather than through total_energy
  // so that each row costs one rotation and the inner loop is trig-free.
  std::vector<double> cpsi(a2.size()), spsi(a2.size()), tors2(a2.size());
  for (std::size_t j = 0; j < a2.size(); ++j) {
    cpsi[j] = std::cos(p.theta_i2 + a2[j]);
    spsi[j] = std::sin(p.theta_i2 + a2[j]);
    const double q = p.theta_pre2 + a2[j];
    tors2[j] = p.k2 * q * q;
  }
  const Vec2 gp = orient.planar();
  const double gm = orient.g_mag;
  auto rot = [](double c, double sn, const Vec2& v) {
    return Vec2{c * v.x() + sn * v.y(), -sn * v.x() + c * v.y()};
  };

  double best_e = std::numeric_limits<double>::infinity();
  Vec2 best{0.0, 0.0};
  const double ell_max_slack = x + kFeasTol;
  const double ell_min_slack = x - 2.0 * s.x_sb_max - kFeasTol;
  for (double t1 : a1) {
    const double phi1 = p.theta_i1 + t1;
    const double c1 = std::cos(phi1);
    const double s1 = std::sin(phi1);
    const double q1 = p.theta_pre1 + t1;
    const double row = p.k1 * q1 * q1 -
                       gm * (p.m1 * gp.dot(rot(c1, s1, p.lc1)) + p.m2 * gp.dot(rot(c1, s1, p.l1)));
    for (std::size_t j = 0; j < a2.size(); ++j) {
      const double ell = p.r1 * t1 + p.r2 * a2[j];
      if (ell > ell_max_slack || ell < ell_min_slack) continue;
      const double c12 = c1 * cpsi[j] - s1 * spsi[j];
      const double s12 = s1 * cpsi[j] + c1 * spsi[j];
      const double dx = 0.5 * (x - ell);
      double e = row + tors2[j] + 2.0 * s.k_sea * dx * dx -
                 gm * p.m2 * gp.dot(rot(c12, s12, p.lc2));
      if (!constraints.soft.empty()) e += contact_penalty(t1, a2[j], p, constraints);
      if (e < best_e) {
        best_e = e;
        best = {t1, a2[j]};
      }
    }
  }
  if (!std::isfinite(best_e)) throw_saturation(bx.hi, x, p, s);
  return make_state(best.x(), best.y(), x, p, s);
}

void write_trajectory_csv(std::ostream& os, const Trajectory& t) {
  os << "x_mm,theta1_deg,theta2_deg,dx_sb_mm,tension_N\n";
  char buf[160];
  for (const FingerState& st : t.states) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", st.x, rad2deg(st.theta1), rad2deg(st.theta2),
                  st.dx_sb, st.tension);
    os << buf;
  }
}

Trajectory read_trajectory_csv(std::istream& is) {
  Trajectory t;
  std::string line;
  if (!std::getline(is, line)) return t;
  if (line.rfind("x_mm,", 0) != 0) throw ParameterError("trajectory CSV: unexpected header");
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::array<double, 5> v{};
    std::istringstream ls(line);
    std::string cell;
    std::size_t k = 0;
    while (std::getline(ls, cell, ',')) {
      if (k >= v.size()) break;
      try {
        v[k++] = std::stod(cell);
      } catch (const std::exception&) {
        throw ParameterError("trajectory CSV line " + std::to_string(lineno) + ": bad number");
      }
    }
    if (k != v.size())
      throw ParameterError("trajectory CSV line " + std::to_string(lineno) + ": expected 5 columns");
    t.states.push_back({deg2rad(v[1]), deg2rad(v[2]), v[0], v[3], v[4]});
  }
  return t;
}

}  // namespace psf
