#include "psf/contact.hpp"

#include <algorithm>
#include <cmath>

namespace psf {

double closest_segment_param(const Vec2& a, const Vec2& b, const Vec2& c) {
  const Vec2 d = b - a;
  const double len2 = d.squaredNorm();
  if (len2 == 0.0) return 0.0;
  return std::clamp((c - a).dot(d) / len2, 0.0, 1.0);
}

double segment_circle_gap(const Vec2& a, const Vec2& b, const Vec2& center, double radius) {
  const double t = closest_segment_param(a, b, center);
  return (center - (a + t * (b - a))).norm() - radius;
}

Segment phalanx_segment(Phalanx which, double theta1, double theta2, const FingerParams& p) {
  const Vec2 pip = pip_position(theta1, p);
  if (which == Phalanx::proximal) return {Vec2::Zero(), pip};
  return {pip, tip_position(theta1, theta2, p)};
}

double phalanx_gap(Phalanx which, double theta1, double theta2, const FingerParams& p,
                   const Vec2& center, double radius) {
  const Segment seg = phalanx_segment(which, theta1, theta2, p);
  return segment_circle_gap(seg.a, seg.b, center, radius);
}

double phalanx_contact_point(Phalanx which, double theta1, double theta2, const FingerParams& p,
                             const Vec2& center, double /*radius*/) {
  const Segment seg = phalanx_segment(which, theta1, theta2, p);
  return closest_segment_param(seg.a, seg.b, center) * (seg.b - seg.a).norm();
}

Vec2 phalanx_material_point(Phalanx which, double arc, double theta1, double theta2,
                            const FingerParams& p) {
  const Segment seg = phalanx_segment(which, theta1, theta2, p);
  const double len = (seg.b - seg.a).norm();
  return len > 0.0 ? Vec2(seg.a + (arc / len) * (seg.b - seg.a)) : seg.a;
}

namespace {

bool stuck(const ContactConstraintSet& c, Phalanx ph) {
  return std::any_of(c.soft.begin(), c.soft.end(), [&](const SoftContactTerm& t) {
    return t.stick && t.stick->phalanx == ph;
  });
}

struct PenaltyEval {
  double energy = 0.0;
  Vec2 gradient = Vec2::Zero();
};

PenaltyEval evaluate_penalty(double theta1, double theta2, const FingerParams& p,
                             const ContactConstraintSet& c, bool want_gradient) {
  PenaltyEval out;
  if (c.soft.empty()) return out;
  const double phi1 = p.theta_i1 + theta1;
  const double phi12 = phi1 + p.theta_i2 + theta2;
  const Eigen::Matrix2d d1 = joint_rotation_derivative(phi1);
  const Eigen::Matrix2d d12 = joint_rotation_derivative(phi12);
  const bool stuck_prox = stuck(c, Phalanx::proximal);
  const bool stuck_dist = stuck(c, Phalanx::distal);

  auto jacobian = [&](Phalanx ph, double t, Vec2& dq1, Vec2& dq2) {
    dq2 = Vec2::Zero();
    if (ph == Phalanx::proximal) {
      dq1 = d1 * (t * p.l1);
    } else {
      const Vec2 local{t * p.len_dist, 0.0};
      dq1 = d1 * p.l1 + d12 * local;
      dq2 = d12 * local;
    }
  };

  for (const SoftContactTerm& term : c.soft) {
    if (term.stick) {
      const SoftStick& sk = *term.stick;
      const Vec2 q = phalanx_material_point(sk.phalanx, sk.arc, theta1, theta2, p);
      const Vec2 u = q - sk.anchor;
      out.energy += 0.5 * term.stiffness * u.squaredNorm();
      if (!want_gradient) continue;
      const double len = sk.phalanx == Phalanx::proximal ? p.l1.norm() : p.len_dist;
      Vec2 dq1, dq2;
      jacobian(sk.phalanx, len > 0.0 ? sk.arc / len : 0.0, dq1, dq2);
      out.gradient.x() += term.stiffness * u.dot(dq1);
      out.gradient.y() += term.stiffness * u.dot(dq2);
      continue;
    }
    for (Phalanx ph : {Phalanx::proximal, Phalanx::distal}) {
      if (ph == Phalanx::proximal && (term.distal_only || stuck_prox)) continue;
      if (ph == Phalanx::distal && (p.single_joint() || stuck_dist)) continue;
      const Segment seg = phalanx_segment(ph, theta1, theta2, p);
      const double t = closest_segment_param(seg.a, seg.b, term.center);
      const Vec2 q = seg.a + t * (seg.b - seg.a);
      const Vec2 to_center = term.center - q;
      const double dist = to_center.norm();
      const double depth = term.radius - dist;
      if (depth <= 0.0) continue;
      out.energy += 0.5 * term.stiffness * depth * depth;
      if (!want_gradient || dist == 0.0) continue;
      const Vec2 n = to_center / dist;
      Vec2 dq1, dq2;
      jacobian(ph, t, dq1, dq2);
      // dE/dθ = k·d·(n · dq/dθ): moving the phalanx toward the center deepens contact.
      out.gradient.x() += term.stiffness * depth * n.dot(dq1);
      out.gradient.y() += term.stiffness * depth * n.dot(dq2);
    }
  }
  return out;
}

}  // namespace

double contact_penalty(double theta1, double theta2, const FingerParams& p,
                       const ContactConstraintSet& c) {
  return evaluate_penalty(theta1, theta2, p, c, false).energy;
}

Vec2 contact_penalty_gradient(double theta1, double theta2, const FingerParams& p,
                              const ContactConstraintSet& c) {
  return evaluate_penalty(theta1, theta2, p, c, true).gradient;
}

void update_soft_records(double theta1, double theta2, const FingerParams& p,
                         ContactConstraintSet& c) {
  for (Phalanx ph : {Phalanx::proximal, Phalanx::distal}) {
    PhalanxContact& rec = ph == Phalanx::proximal ? c.proximal : c.distal;
    if (ph == Phalanx::distal && p.single_joint()) continue;
    double deepest = 0.0;
    double point = rec.contact_point;
    bool held = false;
    for (const SoftContactTerm& term : c.soft) {
      if (!term.stick || term.stick->phalanx != ph) continue;
      const SoftStick& sk = *term.stick;
      const Vec2 q = phalanx_material_point(ph, sk.arc, theta1, theta2, p);
      deepest = std::max(deepest, -(q - sk.anchor).dot(sk.normal));
      point = sk.arc;
      held = true;
    }
    if (held) {
      rec.active = true;
      rec.penetration = deepest;
      rec.contact_point = point;
      continue;
    }
    for (const SoftContactTerm& term : c.soft) {
      if (term.stick) continue;
      if (ph == Phalanx::proximal && term.distal_only) continue;
      const double gap = phalanx_gap(ph, theta1, theta2, p, term.center, term.radius);
      if (-gap > deepest) {
        deepest = -gap;
        point = phalanx_contact_point(ph, theta1, theta2, p, term.center, term.radius);
      }
    }
    if (deepest > 0.0) {
      rec.active = true;
      rec.penetration = deepest;
      rec.contact_point = point;
    }
  }
}

}  // namespace psf
