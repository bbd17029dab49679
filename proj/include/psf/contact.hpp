// Planar contact geometry between a finger and a circular object section.
#pragma once

#include "psf/model.hpp"

#include <optional>
#include <vector>

namespace psf {

enum class Phalanx { proximal, distal };

/// Closest point on segment [a, b] to c, returned as the segment parameter in [0, 1].
double closest_segment_param(const Vec2& a, const Vec2& b, const Vec2& c);

/// Signed clearance between a circle and a segment: distance minus radius.
/// Negative values are penetration depths.
double segment_circle_gap(const Vec2& a, const Vec2& b, const Vec2& center, double radius);

/// End points of a phalanx in the finger frame.
struct Segment {
  Vec2 a;
  Vec2 b;
};
Segment phalanx_segment(Phalanx which, double theta1, double theta2, const FingerParams& p);

/// Clearance of one phalanx to a circle (finger frame).
double phalanx_gap(Phalanx which, double theta1, double theta2, const FingerParams& p,
                   const Vec2& center, double radius);

/// Arc length from the phalanx's proximal joint to the closest point on it.
double phalanx_contact_point(Phalanx which, double theta1, double theta2, const FingerParams& p,
                             const Vec2& center, double radius);

/// State of contact on one phalanx.
struct PhalanxContact {
  bool active = false;
  double penetration = 0.0;    // mm, zero for rigid contacts
  double contact_point = 0.0;  // mm from the phalanx's proximal joint
};

/// Material point of a phalanx stuck to the object surface. It is held
/// to its anchor by an isotropic spring, so it cannot slide off.
struct SoftStick {
  Phalanx phalanx = Phalanx::distal;
  double arc = 0.0;           // mm from the phalanx's proximal joint
  Vec2 anchor{0.0, 0.0};      // finger frame, on the undeformed surface
  Vec2 normal{0.0, 1.0};      // outward surface normal at the anchor
};

/// Compliant obstacle acting on both phalanges through 0.5·k·d² with d
/// the penetration depth. A term with a stick acts only on its material
/// point, and a stuck phalanx ignores the plain terms.
struct SoftContactTerm {
  Vec2 center;  // finger frame, mm
  double radius = 0.0;
  double stiffness = 0.0;  // N/mm
  bool distal_only = false;
  std::optional<SoftStick> stick;
};

/// Point at arc length s along a phalanx (finger frame).
Vec2 phalanx_material_point(Phalanx which, double arc, double theta1, double theta2,
                            const FingerParams& p);

/// Contact constraints applied to one quasi-static solve.
///
/// Rigid contact is sticking: a proximal contact bounds MCP flexion at the
/// touching angle and a distal contact pins both joints at the touching
/// configuration.
struct ContactConstraintSet {
  PhalanxContact proximal;
  PhalanxContact distal;
  std::optional<double> mcp_limit;
  std::optional<Vec2> pinned;
  std::vector<SoftContactTerm> soft;
  // Joint angles imposed from outside (e.g. a hand pushing the finger).
  std::optional<double> fixed1;
  std::optional<double> fixed2;

  bool empty() const { return !mcp_limit && !pinned && soft.empty() && !fixed1 && !fixed2; }
};

/// Penalty energy of all soft terms (N·mm).
double contact_penalty(double theta1, double theta2, const FingerParams& p,
                       const ContactConstraintSet& c);
Vec2 contact_penalty_gradient(double theta1, double theta2, const FingerParams& p,
                              const ContactConstraintSet& c);

/// Penetration of each phalanx into the soft terms, filled into the contact records.
void update_soft_records(double theta1, double theta2, const FingerParams& p,
                         ContactConstraintSet& c);

}  // namespace psf
