// Finger–object interaction: contact activation, object mobility,
// disturbance injection and sensor-signal synthesis.
#pragma once

#include "psf/contact.hpp"
#include "psf/model.hpp"
#include "psf/signal.hpp"
#include "psf/solver.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace psf {

enum class ObjectShape { cylinder, cone, sphere };
enum class Stiffness { rigid, soft };

const char* to_string(ObjectShape s);
ObjectShape object_shape_from_string(const std::string& s);

/// Object seen by the hand. Each finger flexes in its own plane at height z
/// and meets the circular section of the object in that plane; a cylinder
/// has the same section everywhere, a cone tapers and a sphere shrinks away
/// from its equator.
struct ObjectModel {
  ObjectShape shape = ObjectShape::cylinder;
  Vec2 center{0.0, 0.0};  // hand plane, mm
  double radius = 25.0;   // mm; cone: radius at z = 0
  double taper = 0.0;     // cone: radius change per mm of z
  double z_center = 0.0;  // sphere equator height, mm
  Stiffness stiffness = Stiffness::rigid;
  double k_obj = 0.0;  // N/mm, soft objects only
  bool mobile = false;
  Vec2 direction{0.0, 1.0};  // unit vector of the line the object may slide on
  double position = 0.0;     // mm along direction
  double friction = 0.0;     // N of force needed to slide it
  double workspace = 40.0;   // |position| beyond which the object is lost

  void validate() const;
  /// Section radius at height z (0 when the plane misses the object).
  double section_radius(double z) const;
  Vec2 current_center() const { return center + position * direction; }
};

/// Placement of one finger base in the hand plane. The finger frame's +x
/// points along the extended finger; mirror flips which side it flexes to.
struct FingerMount {
  Vec2 origin{0.0, 0.0};
  double heading = 0.0;  // rad, counter-clockwise from hand +x
  bool mirror = false;
  double z = 0.0;  // mm, height of the finger plane

  Vec2 to_finger(const Vec2& world) const;
  Vec2 to_world(const Vec2& local) const;
  Vec2 direction_to_finger(const Vec2& world_dir) const;
};

struct HandModel {
  SeaParams sea;
  HandOrientation orientation;  // gravity in the hand frame
  std::vector<FingerParams> fingers;
  std::vector<FingerMount> mounts;

  void validate() const;
  std::size_t size() const { return fingers.size(); }
  /// Gravity expressed in finger i's frame.
  HandOrientation finger_orientation(std::size_t i) const;
};

/// Thumb (single joint), index, middle, ring and little finger. The four
/// fingers share a base at the origin and flex toward -y in stacked planes;
/// the thumb sits 80 mm across the palm and flexes back toward them.
HandModel default_hand();
/// One finger at the origin of the hand frame.
HandModel single_finger_hand(const FingerParams& p = {});
/// Two identical fingers facing each other, point-symmetric about (gap_x/2, -gap_y/2).
HandModel opposed_pair(const FingerParams& p, double gap_x, double gap_y);

enum class Command { advance, pause, halt };

struct SimOptions {
  double rate = 1000.0;         // Hz
  double k_tip = 0.0;           // N/mm fingertip series compliance, 0 = off
  std::size_t max_samples = 20000;
};

/// Steps a hand sample by sample. Each step advances the commanded
/// fingers by one excursion increment, re-solves every finger, activates
/// new contacts and lets a mobile object slide to force balance.
class HandSimulator {
 public:
  HandSimulator(HandModel hand, std::optional<ObjectModel> object, SolveConfig cfg,
                SimOptions opt = {});

  void step(const std::vector<Command>& cmds);

  std::size_t size() const { return fingers_.size(); }
  std::size_t samples() const { return fingers_.empty() ? 0 : fingers_[0].signal.size(); }
  const HandModel& hand() const { return hand_; }
  const SolveConfig& solver_config() const { return cfg_; }
  const SimOptions& options() const { return opt_; }
  const std::optional<ObjectModel>& object() const { return object_; }

  const FingerState& state(std::size_t i) const { return fingers_[i].state; }
  const ContactConstraintSet& contacts(std::size_t i) const { return fingers_[i].c; }
  const SampledSignal& signal(std::size_t i) const { return fingers_[i].signal; }
  bool saturated(std::size_t i) const { return fingers_[i].saturated; }
  bool in_contact(std::size_t i) const;

  double object_position() const { return object_ ? object_->position : 0.0; }
  const std::vector<double>& object_trace() const { return object_trace_; }
  bool ended() const { return ended_; }
  const std::string& end_reason() const { return end_reason_; }

  /// Adds a note to every finger's annotation.
  void annotate(const std::string& note);

 private:
  struct Finger {
    FingerParams p;
    FingerMount mount;
    HandOrientation orient;
    FingerState state;
    ContactConstraintSet c;
    double pin_arc = 0.0;
    // Soft contact stuck on each phalanx: arc along it and anchor relative
    // to the object center (hand frame).
    struct SoftHold {
      double arc = 0.0;
      Vec2 rel{0.0, 0.0};
    };
    std::array<std::optional<SoftHold>, 2> holds;
    bool saturated = false;
    SampledSignal signal;
  };

  double section(const Finger& f) const;
  Vec2 object_center_in(const Finger& f, double position) const;
  std::vector<SoftContactTerm> soft_terms(const Finger& f, double position) const;
  /// Quasi-static solve; a saturating step returns the clamped state.
  FingerState solve(const Finger& f, double x, const FingerState& prev,
                    const ContactConstraintSet& c) const;
  void advance_finger(Finger& f, double x_new);
  void activate_rigid_contacts(Finger& f, const FingerState& prev, double x_new, FingerState& st);
  void update_soft_holds(Finger& f, FingerState& st);
  std::optional<ContactConstraintSet> constraints_at(const Finger& f, double position) const;
  double finger_energy_at(const Finger& f, double position) const;
  double net_force(double position) const;
  double penetration_limit(double from, double sign, double max_shift) const;
  void move_object();
  void commit_object(double position);
  void record();

  HandModel hand_;
  std::optional<ObjectModel> object_;
  SolveConfig cfg_;
  SimOptions opt_;
  std::vector<Finger> fingers_;
  std::vector<double> object_trace_;
  bool ended_ = false;
  std::string end_reason_;
  mutable bool clamped_ = false;  // set when a solve hit SEA saturation
};

enum class Strategy { nominal, contact_pause };

const char* to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

/// Per-finger excursion plan: idle until start_sample, then advance one
/// step per sample until x_end.
struct ExcursionSchedule {
  std::size_t start_sample = 0;
  double x_end = 0.0;
};

/// Reports whether finger i has registered contact given its signal so far.
using ContactProbe = std::function<bool(std::size_t finger, const SampledSignal& signal)>;

struct GraspSimResult {
  std::vector<SampledSignal> signals;
  std::vector<FingerState> final_states;
  std::vector<double> object_trace;
  bool ended_early = false;
  std::string end_reason;
};

/// Runs schedules to completion. Under contact_pause a finger stops
/// advancing once it reports contact and resumes when every finger has
/// either reported contact or finished its schedule. Without a probe the
/// ground-truth contact annotation is used.
GraspSimResult simulate_grasp(const HandModel& hand, const std::optional<ObjectModel>& object,
                              const std::vector<ExcursionSchedule>& schedules, Strategy strategy,
                              const SolveConfig& cfg, const SimOptions& opt = {},
                              const ContactProbe& probe = {});

struct DisturbanceEvent {
  double t_start = 0.0;  // s
  double t_end = 0.0;    // s
  DisturbanceKind kind = DisturbanceKind::forced_extension;
  double magnitude = 0.0;  // rad imposed on the disturbed joint
  int joint = 1;

  void validate() const;
};

/// A finger holding still at a fixed excursion.
struct HoldContext {
  FingerParams p;
  SeaParams s;
  HandOrientation orient;
  SolveConfig cfg;
  FingerState hold;
  ContactConstraintSet contacts;
  double rate = 1000.0;
  double duration = 0.5;  // s
};

/// Holding finger at a preload tension, found by advancing from rest.
HoldContext preloaded_hold(const FingerParams& p, const SeaParams& s, const HandOrientation& o,
                           const SolveConfig& cfg, double preload, double duration = 0.5);

/// Holding finger whose MCP rests on a support from `brace` tension on,
/// then loaded to `preload`. Removing the support lets tension fall.
HoldContext braced_hold(const FingerParams& p, const SeaParams& s, const HandOrientation& o,
                        const SolveConfig& cfg, double preload, double brace,
                        double duration = 0.5);

/// Signal of a holding finger subject to one disturbance. Forced extension
/// and flexion impose a joint-angle offset during [t_start, t_end) and are
/// clamped to what the joint range and tendon allow; support loss removes
/// every contact from t_start on and the finger settles to its free state.
/// Magnitude is ignored for support loss.
SampledSignal inject_disturbance(const HoldContext& ctx, const DisturbanceEvent& ev);

/// Additive zero-mean Gaussian noise on tension, deterministic in seed.
SampledSignal synthesize_noise(const SampledSignal& signal, double sigma, std::uint64_t seed);

}  // namespace psf
