#include "psf/sim.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace psf {
namespace {

Eigen::Matrix2d rotation_ccw(double a) {
  Eigen::Matrix2d r;
  r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  return r;
}

// First MCP angle in [lo, hi] at which the proximal phalanx touches the circle.
std::optional<double> touching_angle(const FingerParams& p, double lo, double hi,
                                     const Vec2& center, double radius) {
  auto gap = [&](double t1) { return phalanx_gap(Phalanx::proximal, t1, 0.0, p, center, radius); };
  if (gap(lo) <= 0.0) return lo;
  constexpr int kScan = 256;
  double a = lo;
  for (int k = 1; k <= kScan; ++k) {
    const double b = lo + (hi - lo) * k / kScan;
    if (gap(b) <= 0.0) {
      double l = a, u = b;
      for (int it = 0; it < 60; ++it) {
        const double m = 0.5 * (l + u);
        (gap(m) <= 0.0 ? u : l) = m;
      }
      return l;
    }
    a = b;
  }
  return std::nullopt;
}

// Joint angles that put the point at arc length s of the distal phalanx on target.
std::optional<Vec2> distal_ik(const FingerParams& p, const Vec2& guess, double s,
                              const Vec2& target) {
  Vec2 th = guess;
  for (int it = 0; it < 40; ++it) {
    const Vec2 r = distal_point(th.x(), th.y(), s, p) - target;
    if (r.norm() < 1e-11) {
      if (th.x() < p.min_angle(1) - 1e-9 || th.x() > p.max_angle(1) + 1e-9 ||
          th.y() < p.min_angle(2) - 1e-9 || th.y() > p.max_angle(2) + 1e-9)
        return std::nullopt;
      return th;
    }
    const double phi1 = p.theta_i1 + th.x();
    const double phi12 = phi1 + p.theta_i2 + th.y();
    const Vec2 tip_local{s, 0.0};
    Eigen::Matrix2d j;
    j.col(1) = joint_rotation_derivative(phi12) * tip_local;
    j.col(0) = joint_rotation_derivative(phi1) * p.l1 + j.col(1);
    if (std::abs(j.determinant()) < 1e-9) {
      // Straight finger: step off the singularity into the flexed side.
      if (it > 0) return std::nullopt;
      th.y() += 1e-3;
      continue;
    }
    th -= j.partialPivLu().solve(r);
  }
  return std::nullopt;
}

void reset_records(ContactConstraintSet& c) {
  c.proximal = {};
  c.distal = {};
}

}  // namespace

const char* to_string(ObjectShape s) {
  switch (s) {
    case ObjectShape::cylinder: return "cylinder";
    case ObjectShape::cone: return "cone";
    case ObjectShape::sphere: return "sphere";
  }
  return "unknown";
}

ObjectShape object_shape_from_string(const std::string& s) {
  if (s == "cylinder") return ObjectShape::cylinder;
  if (s == "cone") return ObjectShape::cone;
  if (s == "sphere") return ObjectShape::sphere;
  throw ParameterError("unknown object shape '" + s + "'");
}

const char* to_string(Strategy s) {
  return s == Strategy::nominal ? "nominal" : "contact-pause";
}

Strategy strategy_from_string(const std::string& s) {
  if (s == "nominal") return Strategy::nominal;
  if (s == "contact-pause") return Strategy::contact_pause;
  throw ParameterError("unknown strategy '" + s + "'");
}

void ObjectModel::validate() const {
  if (!(radius > 0.0)) throw ParameterError("object.radius must be positive");
  if (stiffness == Stiffness::soft && !(k_obj > 0.0))
    throw ParameterError("object.k_obj must be positive for a soft object");
  if (mobile) {
    if (std::abs(direction.norm() - 1.0) > 1e-9)
      throw ParameterError("object.direction must be a unit vector");
    if (friction < 0.0) throw ParameterError("object.friction must be >= 0");
  }
}

double ObjectModel::section_radius(double z) const {
  switch (shape) {
    case ObjectShape::cylinder: return radius;
    case ObjectShape::cone: return std::max(0.0, radius + taper * z);
    case ObjectShape::sphere: {
      const double dz = z - z_center;
      return dz * dz < radius * radius ? std::sqrt(radius * radius - dz * dz) : 0.0;
    }
  }
  return 0.0;
}

Vec2 FingerMount::to_finger(const Vec2& world) const {
  Vec2 v = rotation_ccw(heading).transpose() * (world - origin);
  if (mirror) v.y() = -v.y();
  return v;
}

Vec2 FingerMount::to_world(const Vec2& local) const {
  Vec2 v = local;
  if (mirror) v.y() = -v.y();
  return origin + rotation_ccw(heading) * v;
}

Vec2 FingerMount::direction_to_finger(const Vec2& world_dir) const {
  Vec2 v = rotation_ccw(heading).transpose() * world_dir;
  if (mirror) v.y() = -v.y();
  return v;
}

void HandModel::validate() const {
  sea.validate();
  orientation.validate();
  if (fingers.empty()) throw ParameterError("hand needs at least one finger");
  if (fingers.size() != mounts.size()) throw ParameterError("hand: one mount per finger required");
  for (const FingerParams& f : fingers) f.validate();
}

HandOrientation HandModel::finger_orientation(std::size_t i) const {
  const Vec2 g = mounts[i].direction_to_finger(orientation.planar());
  HandOrientation o = orientation;
  o.g_dir = Vec3{g.x(), g.y(), orientation.g_dir.z()};
  return o;
}

HandModel default_hand() {
  HandModel h;
  FingerParams thumb = FingerParams{}.as_single_joint();
  thumb.name = "thumb";
  thumb.len_prox = 50.0;
  thumb.l1 = {50.0, 0.0};
  thumb.lc1 = {25.0, 0.0};
  thumb.m1 = 0.012;
  h.fingers.push_back(thumb);
  h.mounts.push_back({{0.0, -80.0}, 0.0, true, 0.0});
  const char* names[] = {"index", "middle", "ring", "little"};
  const double zs[] = {-24.0, -8.0, 8.0, 24.0};
  for (int k = 0; k < 4; ++k) {
    FingerParams f;
    f.name = names[k];
    h.fingers.push_back(f);
    h.mounts.push_back({{0.0, 0.0}, 0.0, false, zs[k]});
  }
  return h;
}

HandModel single_finger_hand(const FingerParams& p) {
  HandModel h;
  h.fingers.push_back(p);
  h.mounts.push_back({});
  return h;
}

HandModel opposed_pair(const FingerParams& p, double gap_x, double gap_y) {
  HandModel h;
  FingerParams a = p, b = p;
  a.name = "a";
  b.name = "b";
  h.fingers = {a, b};
  h.mounts.push_back({{0.0, 0.0}, 0.0, false, 0.0});
  h.mounts.push_back({{gap_x, -gap_y}, kPi, false, 0.0});
  return h;
}

HandSimulator::HandSimulator(HandModel hand, std::optional<ObjectModel> object, SolveConfig cfg,
                             SimOptions opt)
    : hand_(std::move(hand)), object_(std::move(object)), cfg_(cfg), opt_(opt) {
  hand_.validate();
  cfg_.validate();
  if (object_) object_->validate();
  for (std::size_t i = 0; i < hand_.size(); ++i) {
    Finger f;
    f.p = hand_.fingers[i];
    f.mount = hand_.mounts[i];
    f.orient = hand_.finger_orientation(i);
    f.signal.rate = opt_.rate;
    fingers_.push_back(f);
  }
  for (Finger& f : fingers_) {
    f.c.soft = soft_terms(f, object_position());
    f.state = solve(f, 0.0, FingerState{}, f.c);
    if (object_ && section(f) > 0.0) {
      const Vec2 center = object_center_in(f, object_position());
      for (Phalanx ph : {Phalanx::proximal, Phalanx::distal}) {
        if (ph == Phalanx::distal && f.p.single_joint()) continue;
        if (phalanx_gap(ph, f.state.theta1, f.state.theta2, f.p, center, section(f)) < 0.0)
          throw ParameterError("object penetrates finger '" + f.p.name + "' at rest");
      }
    }
  }
  record();
}

bool HandSimulator::in_contact(std::size_t i) const {
  const ContactConstraintSet& c = fingers_[i].c;
  return c.pinned.has_value() || c.mcp_limit.has_value() || c.proximal.active || c.distal.active;
}

void HandSimulator::annotate(const std::string& note) {
  for (Finger& f : fingers_) f.signal.truth.notes.push_back(note);
}

double HandSimulator::section(const Finger& f) const {
  return object_ ? object_->section_radius(f.mount.z) : 0.0;
}

Vec2 HandSimulator::object_center_in(const Finger& f, double position) const {
  return f.mount.to_finger(object_->center + position * object_->direction);
}

std::vector<SoftContactTerm> HandSimulator::soft_terms(const Finger& f, double position) const {
  std::vector<SoftContactTerm> terms;
  if (!object_ || section(f) <= 0.0) return terms;
  const Vec2 center = object_center_in(f, position);
  if (object_->stiffness == Stiffness::soft) {
    terms.push_back({center, section(f), object_->k_obj, false, std::nullopt});
  } else if (opt_.k_tip > 0.0 && !f.p.single_joint()) {
    terms.push_back({center, section(f), opt_.k_tip, true, std::nullopt});
  }
  if (terms.empty()) return terms;
  const Vec2 world_center = object_->center + position * object_->direction;
  for (std::size_t i = 0; i < 2; ++i) {
    if (!f.holds[i]) continue;
    SoftContactTerm t = terms.front();
    const Vec2 anchor = f.mount.to_finger(world_center + f.holds[i]->rel);
    t.stick = SoftStick{i == 0 ? Phalanx::proximal : Phalanx::distal, f.holds[i]->arc, anchor,
                        f.mount.direction_to_finger(f.holds[i]->rel.normalized())};
    terms.push_back(t);
  }
  return terms;
}

FingerState HandSimulator::solve(const Finger& f, double x, const FingerState& prev,
                                 const ContactConstraintSet& c) const {
  try {
    return solve_step(x, prev, c, f.p, hand_.sea, f.orient, cfg_);
  } catch (const SaturationError& e) {
    clamped_ = true;
    return e.clamped();
  }
}

void HandSimulator::activate_rigid_contacts(Finger& f, const FingerState& prev, double x_new,
                                            FingerState& st) {
  if (f.c.pinned) return;
  const Vec2 center = object_center_in(f, object_position());
  const double rad = section(f);
  auto gap = [&](Phalanx ph, const FingerState& s) {
    return phalanx_gap(ph, s.theta1, s.theta2, f.p, center, rad);
  };

  // Excursion bisection for the touching configuration, then stick there.
  auto pin_on = [&](Phalanx ph) {
    double a = prev.x, b = x_new;
    for (int it = 0; it < 60 && b - a > 0.0; ++it) {
      const double m = 0.5 * (a + b);
      (gap(ph, solve(f, m, prev, f.c)) < 0.0 ? b : a) = m;
    }
    const FingerState touch = gap(ph, prev) < 0.0 ? st : solve(f, a, prev, f.c);
    f.c.pinned = Vec2{touch.theta1, touch.theta2};
    f.pin_arc = phalanx_contact_point(ph, touch.theta1, touch.theta2, f.p, center, rad);
    f.c.distal = {true, 0.0, f.pin_arc};
    st = solve(f, x_new, prev, f.c);
  };

  if (f.p.single_joint()) {
    if (gap(Phalanx::proximal, st) < 0.0) pin_on(Phalanx::proximal);
    return;
  }
  if (!f.c.mcp_limit && gap(Phalanx::proximal, st) < 0.0) {
    double a = prev.theta1, b = st.theta1;
    auto g1 = [&](double t1) { return phalanx_gap(Phalanx::proximal, t1, 0.0, f.p, center, rad); };
    if (g1(a) > 0.0) {
      for (int it = 0; it < 60; ++it) {
        const double m = 0.5 * (a + b);
        (g1(m) <= 0.0 ? b : a) = m;
      }
    }
    f.c.mcp_limit = a;
    f.c.proximal = {true, 0.0,
                    phalanx_contact_point(Phalanx::proximal, a, 0.0, f.p, center, rad)};
    st = solve(f, x_new, prev, f.c);
  }
  if (opt_.k_tip > 0.0) return;
  if (gap(Phalanx::distal, st) < 0.0) pin_on(Phalanx::distal);
}

void HandSimulator::advance_finger(Finger& f, double x_new) {
  const FingerState prev = f.state;
  f.c.soft = soft_terms(f, object_position());
  clamped_ = false;
  FingerState st = solve(f, x_new, prev, f.c);
  if (clamped_) {
    if (!f.saturated) f.signal.truth.notes.push_back(f.p.name + ": SEA saturated, excursion held");
    f.saturated = true;
    x_new = prev.x;
    st = solve(f, x_new, prev, f.c);
  }
  const bool rigid = object_ && object_->stiffness == Stiffness::rigid;
  if (rigid && section(f) > 0.0) activate_rigid_contacts(f, prev, x_new, st);
  if (!f.c.soft.empty()) update_soft_holds(f, st);
  if (!f.c.soft.empty()) {
    const PhalanxContact keep_prox = f.c.mcp_limit ? f.c.proximal : PhalanxContact{};
    const PhalanxContact keep_dist = f.c.pinned ? f.c.distal : PhalanxContact{};
    reset_records(f.c);
    update_soft_records(st.theta1, st.theta2, f.p, f.c);
    if (keep_prox.active) f.c.proximal = keep_prox;
    if (keep_dist.active) f.c.distal = keep_dist;
  }
  f.state = st;
}

// Sticks a phalanx to the soft surface where it first sinks in and lets go
// once the stuck point is pulled back out.
void HandSimulator::update_soft_holds(Finger& f, FingerState& st) {
  const Vec2 world_center = object_->current_center();
  const Vec2 center = object_center_in(f, object_position());
  const bool distal_only = f.c.soft.front().distal_only;
  bool changed = false;
  for (std::size_t i = 0; i < 2; ++i) {
    const Phalanx ph = i == 0 ? Phalanx::proximal : Phalanx::distal;
    if (ph == Phalanx::distal && f.p.single_joint()) continue;
    if (ph == Phalanx::proximal && distal_only) continue;
    if (f.holds[i]) {
      const Vec2 q = f.mount.to_world(
          phalanx_material_point(ph, f.holds[i]->arc, st.theta1, st.theta2, f.p));
      const Vec2 anchor = world_center + f.holds[i]->rel;
      if ((q - anchor).dot(f.holds[i]->rel) > 0.0) {
        f.holds[i].reset();
        changed = true;
      }
    } else if (phalanx_gap(ph, st.theta1, st.theta2, f.p, center, section(f)) < 0.0) {
      const double arc = phalanx_contact_point(ph, st.theta1, st.theta2, f.p, center, section(f));
      const Vec2 q = f.mount.to_world(phalanx_material_point(ph, arc, st.theta1, st.theta2, f.p));
      const Vec2 dir = q - world_center;
      if (dir.norm() == 0.0) continue;
      f.holds[i] = Finger::SoftHold{arc, section(f) * dir.normalized()};
      changed = true;
    }
  }
  if (!changed) return;
  f.c.soft = soft_terms(f, object_position());
  clamped_ = false;
  st = solve(f, st.x, st, f.c);
  if (clamped_) f.saturated = true;
}

std::optional<ContactConstraintSet> HandSimulator::constraints_at(const Finger& f,
                                                                  double position) const {
  ContactConstraintSet c = f.c;
  c.soft = soft_terms(f, position);
  const bool rigid = object_->stiffness == Stiffness::rigid;
  if (!rigid) return c;
  const Vec2 center = object_center_in(f, position);
  const double rad = section(f);
  if (c.pinned) {
    std::optional<Vec2> th;
    if (f.p.single_joint()) {
      if (auto a = touching_angle(f.p, f.p.min_angle(1), f.p.max_angle(1), center, rad))
        th = Vec2{*a, 0.0};
    } else {
      const Vec2 shift = center - object_center_in(f, object_position());
      const Vec2 target = distal_point(c.pinned->x(), c.pinned->y(), f.pin_arc, f.p) + shift;
      th = distal_ik(f.p, *c.pinned, f.pin_arc, target);
    }
    // The tendon cannot hold a pose that needs more cable than is drawn in.
    if (!th || f.p.r1 * th->x() + f.p.r2 * th->y() > f.state.x) return std::nullopt;
    c.pinned = th;
  } else if (c.mcp_limit) {
    const auto a = touching_angle(f.p, f.p.min_angle(1), f.p.max_angle(1), center, rad);
    if (!a) return std::nullopt;
    c.mcp_limit = a;
  }
  return c;
}

double HandSimulator::finger_energy_at(const Finger& f, double position) const {
  std::optional<ContactConstraintSet> c = constraints_at(f, position);
  if (!c) {
    c = f.c;
    c->pinned.reset();
    c->mcp_limit.reset();
    c->soft = soft_terms(f, position);
  }
  FingerState st;
  try {
    st = solve(f, f.state.x, f.state, *c);
  } catch (const std::exception&) {
    c->pinned.reset();
    c->mcp_limit.reset();
    st = solve(f, f.state.x, f.state, *c);
  }
  return step_objective(st.theta1, st.theta2, st.x, *c, f.p, hand_.sea, f.orient);
}

double HandSimulator::net_force(double position) const {
  constexpr double kDelta = 1e-3;
  double force = 0.0;
  for (std::size_t i = 0; i < fingers_.size(); ++i) {
    const Finger& f = fingers_[i];
    if (section(f) <= 0.0) continue;
    const bool soft = !soft_terms(f, position).empty();
    if (!in_contact(i) && !soft) continue;
    force -= (finger_energy_at(f, position + kDelta) - finger_energy_at(f, position - kDelta)) /
             (2.0 * kDelta);
  }
  return force;
}

// Largest shift along sign·direction (up to max_shift) before the rigid
// object runs into a finger that is not yet touching it.
double HandSimulator::penetration_limit(double from, double sign, double max_shift) const {
  if (object_->stiffness != Stiffness::rigid) return max_shift;
  double limit = max_shift;
  for (std::size_t i = 0; i < fingers_.size(); ++i) {
    const Finger& f = fingers_[i];
    if (in_contact(i) || section(f) <= 0.0) continue;
    auto clear = [&](double d) {
      const Vec2 center = object_center_in(f, from + sign * d);
      for (Phalanx ph : {Phalanx::proximal, Phalanx::distal}) {
        if (ph == Phalanx::distal && f.p.single_joint()) continue;
        if (phalanx_gap(ph, f.state.theta1, f.state.theta2, f.p, center, section(f)) < 0.0)
          return false;
      }
      return true;
    };
    constexpr double kScan = 0.05;
    for (double d = kScan; d < limit + kScan; d += kScan) {
      const double dd = std::min(d, limit);
      if (!clear(dd)) {
        double a = dd - kScan, b = dd;
        for (int it = 0; it < 50; ++it) {
          const double m = 0.5 * (a + b);
          (clear(m) ? a : b) = m;
        }
        limit = std::max(0.0, a);
        break;
      }
    }
  }
  return limit;
}

void HandSimulator::move_object() {
  if (!object_ || !object_->mobile || ended_) return;
  bool touching = false;
  for (std::size_t i = 0; i < fingers_.size(); ++i)
    touching = touching || in_contact(i) || !fingers_[i].c.soft.empty();
  if (!touching) return;

  const double p0 = object_->position;
  const double f0 = net_force(p0);
  if (std::abs(f0) <= object_->friction) return;
  const double sign = f0 > 0.0 ? 1.0 : -1.0;
  const double reach = object_->workspace + 1.0 - sign * p0;
  const double limit = penetration_limit(p0, sign, std::max(0.0, reach));
  auto excess = [&](double d) { return sign * net_force(p0 + sign * d) - object_->friction; };

  double lo = 0.0, hi = std::min(0.01, limit);
  while (hi < limit && excess(hi) > 0.0) {
    lo = hi;
    hi = std::min(2.0 * hi, limit);
  }
  double shift = hi;
  if (excess(hi) <= 0.0) {
    for (int it = 0; it < 40; ++it) {
      const double m = 0.5 * (lo + hi);
      (excess(m) > 0.0 ? lo : hi) = m;
    }
    shift = hi;
  }
  commit_object(p0 + sign * shift);
  if (std::abs(object_->position) > object_->workspace) {
    ended_ = true;
    end_reason_ = "object escaped workspace";
    for (Finger& f : fingers_) f.signal.truth.ended_early = true;
    annotate(end_reason_);
  }
}

void HandSimulator::commit_object(double position) {
  std::vector<std::optional<ContactConstraintSet>> next;
  for (const Finger& f : fingers_) next.push_back(constraints_at(f, position));
  object_->position = position;
  for (std::size_t i = 0; i < fingers_.size(); ++i) {
    Finger& f = fingers_[i];
    if (next[i]) {
      f.c = *next[i];
    } else {
      f.c.pinned.reset();
      f.c.mcp_limit.reset();
      reset_records(f.c);
      f.c.soft = soft_terms(f, position);
      f.signal.truth.notes.push_back(f.p.name + ": contact released at sample " +
                                     std::to_string(f.signal.size()));
    }
    f.state = solve(f, f.state.x, f.state, f.c);
  }
}

void HandSimulator::step(const std::vector<Command>& cmds) {
  if (cmds.size() != fingers_.size()) throw ParameterError("one command per finger required");
  if (ended_) return;
  for (std::size_t i = 0; i < fingers_.size(); ++i) {
    Finger& f = fingers_[i];
    const bool go = cmds[i] == Command::advance && !f.saturated;
    advance_finger(f, f.state.x + (go ? cfg_.excursion_step : 0.0));
  }
  move_object();
  record();
}

void HandSimulator::record() {
  for (Finger& f : fingers_) {
    const std::size_t idx = f.signal.size();
    f.signal.append(f.state.x, f.state.tension, f.state.theta1, f.state.theta2);
    SignalTruth& truth = f.signal.truth;
    const bool prox = f.c.mcp_limit.has_value() || (f.c.proximal.active && !f.p.single_joint());
    const bool dist = f.c.pinned.has_value() || f.c.distal.active ||
                      (f.p.single_joint() && f.c.proximal.active);
    if (prox && !truth.proximal_contact) truth.proximal_contact = idx;
    if (dist && !truth.distal_contact) truth.distal_contact = idx;
  }
  object_trace_.push_back(object_position());
}

GraspSimResult simulate_grasp(const HandModel& hand, const std::optional<ObjectModel>& object,
                              const std::vector<ExcursionSchedule>& schedules, Strategy strategy,
                              const SolveConfig& cfg, const SimOptions& opt,
                              const ContactProbe& probe) {
  if (schedules.size() != hand.size()) throw ParameterError("one schedule per finger required");
  HandSimulator sim(hand, object, cfg, opt);
  const std::size_t n = hand.size();
  std::vector<bool> contacted(n, false);
  bool released = false;

  while (sim.samples() < opt.max_samples && !sim.ended()) {
    std::vector<bool> done(n);
    bool all_done = true;
    for (std::size_t i = 0; i < n; ++i) {
      done[i] = sim.saturated(i) || sim.state(i).x >= schedules[i].x_end - 1e-12;
      all_done = all_done && done[i];
      if (!contacted[i]) {
        const SignalTruth& t = sim.signal(i).truth;
        contacted[i] = probe ? probe(i, sim.signal(i)) : (t.proximal_contact || t.distal_contact);
      }
    }
    if (all_done) break;
    if (!released) {
      released = true;
      for (std::size_t i = 0; i < n; ++i) released = released && (contacted[i] || done[i]);
    }
    std::vector<Command> cmds(n, Command::pause);
    for (std::size_t i = 0; i < n; ++i) {
      if (done[i] || sim.samples() <= schedules[i].start_sample) continue;
      if (strategy == Strategy::contact_pause && contacted[i] && !released) continue;
      cmds[i] = Command::advance;
    }
    sim.step(cmds);
  }

  GraspSimResult r;
  for (std::size_t i = 0; i < n; ++i) {
    r.signals.push_back(sim.signal(i));
    r.final_states.push_back(sim.state(i));
  }
  r.object_trace = sim.object_trace();
  r.ended_early = sim.ended();
  r.end_reason = sim.end_reason();
  return r;
}

void DisturbanceEvent::validate() const {
  if (!(t_start < t_end)) throw ParameterError("disturbance needs t_start < t_end");
  if (magnitude < 0.0) throw ParameterError("disturbance magnitude must be >= 0");
  if (joint != 1 && joint != 2) throw ParameterError("disturbance joint must be 1 or 2");
}

HoldContext preloaded_hold(const FingerParams& p, const SeaParams& s, const HandOrientation& o,
                           const SolveConfig& cfg, double preload, double duration) {
  HoldContext ctx{p, s, o, cfg, {}, {}, 1000.0, duration};
  FingerState st;
  for (double x = 0.0; st.tension < preload; x += cfg.excursion_step)
    st = solve_step(x, st, ctx.contacts, p, s, o, cfg);
  ctx.hold = st;
  return ctx;
}

HoldContext braced_hold(const FingerParams& p, const SeaParams& s, const HandOrientation& o,
                        const SolveConfig& cfg, double preload, double brace, double duration) {
  if (!(brace > 0.0 && brace < preload))
    throw ParameterError("brace tension must lie in (0, preload)");
  HoldContext ctx = preloaded_hold(p, s, o, cfg, brace, duration);
  ctx.contacts.mcp_limit = ctx.hold.theta1;
  FingerState st = ctx.hold;
  for (double x = st.x; st.tension < preload; x += cfg.excursion_step)
    st = solve_step(x, st, ctx.contacts, p, s, o, cfg);
  ctx.hold = st;
  return ctx;
}

SampledSignal inject_disturbance(const HoldContext& ctx, const DisturbanceEvent& ev) {
  ev.validate();
  SampledSignal out;
  out.rate = ctx.rate;
  const auto n = static_cast<std::size_t>(std::llround(ctx.duration * ctx.rate));
  const std::size_t i0 = std::min(n, static_cast<std::size_t>(std::llround(ev.t_start * ctx.rate)));
  const std::size_t i1 = std::min(n, static_cast<std::size_t>(std::llround(ev.t_end * ctx.rate)));
  const FingerState& h = ctx.hold;
  const FingerParams& p = ctx.p;

  DisturbanceWindow win{i0, ev.kind == DisturbanceKind::support_loss ? n : i1, ev.kind, 0.0, false};
  const bool imposed = ev.kind != DisturbanceKind::support_loss;
  const bool single = p.single_joint();
  const int joint = single ? 1 : ev.joint;
  const double r = joint == 1 ? p.r1 : p.r2;
  const double th0 = joint == 1 ? h.theta1 : h.theta2;
  const double ell = p.r1 * h.theta1 + p.r2 * h.theta2;

  double amount = 0.0;
  if (imposed) {
    double room;
    if (ev.kind == DisturbanceKind::forced_extension) {
      room = std::min(th0 - p.min_angle(joint), (ell - (h.x - 2.0 * ctx.s.x_sb_max)) / r);
    } else {
      // Beyond this the cable would go slack.
      room = std::min(p.max_angle(joint) - th0, (h.x - ell) / r);
    }
    room = std::max(0.0, room);
    amount = std::min(ev.magnitude, room);
    win.clamped = amount < ev.magnitude;
    win.magnitude = amount;
    if (win.clamped) {
      std::ostringstream os;
      os << "disturbance clamped from " << ev.magnitude << " to " << amount << " rad";
      out.truth.notes.push_back(os.str());
    }
  }
  const double sign = ev.kind == DisturbanceKind::forced_extension ? -1.0 : 1.0;
  constexpr double kRampSamples = 10.0;

  FingerState prev = h;
  for (std::size_t k = 0; k < n; ++k) {
    FingerState st = h;
    const bool inside = k >= win.start && k < win.end;
    if (inside && imposed && amount > 0.0) {
      const double frac = std::min(1.0, static_cast<double>(k - win.start + 1) / kRampSamples);
      ContactConstraintSet c = ctx.contacts;
      c.soft.clear();
      const std::optional<Vec2> pin = c.pinned;
      c.pinned.reset();
      c.mcp_limit.reset();
      const double target = th0 + sign * amount * frac;
      if (joint == 1) {
        c.fixed1 = target;
        if (pin) c.fixed2 = pin->y();
      } else {
        c.fixed2 = target;
        c.fixed1 = pin ? pin->x() : h.theta1;
      }
      st = solve_step(h.x, prev, c, p, ctx.s, ctx.orient, ctx.cfg);
    } else if (inside && !imposed) {
      st = solve_step(h.x, prev, ContactConstraintSet{}, p, ctx.s, ctx.orient, ctx.cfg);
    }
    out.append(st.x, st.tension, st.theta1, st.theta2);
    prev = st;
  }
  out.truth.disturbances.push_back(win);
  return out;
}

SampledSignal synthesize_noise(const SampledSignal& signal, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw ParameterError("noise sigma must be >= 0");
  SampledSignal out = signal;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (double& f : out.tension) f += noise(rng);
  return out;
}

}  // namespace psf
