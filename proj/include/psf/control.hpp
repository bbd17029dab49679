// Rule-based grasp control: per-finger phase machine, contact-pause
// coordination, online stiffness classification and posture snapshots.
#pragma once

#include "psf/proprioception.hpp"
#include "psf/sim.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace psf {

enum class FingerPhase { idle, reaching, paused, loading, halted_soft, halted_instability, holding };
const char* to_string(FingerPhase p);

/// Transitions the phase machine may take. Reaching may also end in
/// holding when a finger runs out of excursion (or hits the target
/// tension) without ever registering distal contact.
bool legal_transition(FingerPhase from, FingerPhase to);
bool terminal(FingerPhase p);

struct ControlConfig {
  double target_tension = 40.0;  // N, rigid loading stops here
  double hold_deadband = 0.3;    // N, disturbance monitoring while holding
  Strategy strategy = Strategy::nominal;
  // Samples recorded after every finger has stopped, so the posture is
  // read from a still signal.
  std::size_t settle = 24;

  void validate(const SeaParams& s) const;
};

/// What the controller learns about one finger in one cycle.
struct FingerObservation {
  std::size_t sample = 0;  // newest sample index
  bool started = true;     // schedule start reached
  bool contact = false;    // first detection threshold crossed
  std::vector<ContactEvent> new_events;
  std::optional<StiffnessClass> stiffness;
  double tension = 0.0;  // N, as measured
  bool exhausted = false;  // schedule end or SEA saturation
};

struct ControlLogEntry {
  std::size_t sample = 0;
  std::size_t finger = 0;
  std::string what;  // "transition", "event", "disturbance", "fault", "anomaly"
  std::string detail;
  std::optional<FingerPhase> from;
  std::optional<FingerPhase> to;
};

struct ControllerState {
  std::vector<FingerPhase> phase;
  std::vector<bool> contacted;
  std::vector<bool> distal;
  std::vector<double> hold_baseline;
  std::vector<std::vector<double>> hold_tension;
  std::vector<bool> disturbed;
  std::optional<std::string> fault;
  std::vector<ControlLogEntry> log;

  explicit ControllerState(std::size_t fingers = 0);
  std::size_t size() const { return phase.size(); }
  bool finished() const;
};

/// One decision cycle: updates phases from the observations and returns
/// one command per finger. A contradictory detector output puts the
/// controller in a fault state where every finger halts.
std::vector<Command> step_controller(ControllerState& state,
                                     const std::vector<FingerObservation>& obs,
                                     const ControlConfig& cfg);

class NotReadyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct PostureSnapshot {
  double timestamp = 0.0;  // s
  std::vector<std::string> names;
  std::vector<Vec2> angles;  // rad
};

/// Noise on the tension the controller sees; the simulator stays clean.
struct SensorNoise {
  double sigma = 0.0;  // N
  std::uint64_t seed = 0;
};

struct GraspSetup {
  HandModel hand;
  std::optional<ObjectModel> object;
  SolveConfig solver;
  DetectorConfig detector;
  ControlConfig control;
  SimOptions sim;
  SensorNoise noise;
  // Per finger; empty means start at once and run to the free-flexion limit.
  std::vector<ExcursionSchedule> schedules;
};

struct GraspOutcome {
  std::vector<std::string> names;
  std::vector<SampledSignal> measured;  // what the controller saw (truth attached)
  std::vector<Trajectory> references;
  std::vector<std::vector<ContactEvent>> events;
  std::vector<std::optional<StiffnessClass>> stiffness;
  std::vector<std::optional<SlopeMetrics>> slopes;
  std::vector<FingerPhase> phases;
  std::vector<double> object_trace;
  std::optional<std::string> fault;
  std::string end_reason;
  std::vector<ControlLogEntry> log;

  bool any_distal() const;
};

/// Simulates the hand under the controller until every finger has halted
/// or is holding, the sample budget runs out or the object is lost.
GraspOutcome run_grasp(const GraspSetup& setup);

/// Per-finger angle estimates at the end of a run. Throws NotReadyError
/// while any finger is not halted or holding.
PostureSnapshot posture_snapshot(const GraspOutcome& g, const HandModel& hand,
                                 const DetectorConfig& cfg);

/// Ground-truth angles at the last sample, in the same layout.
PostureSnapshot posture_truth(const GraspOutcome& g);

void write_control_log(std::ostream& os, const std::vector<ControlLogEntry>& log,
                       const std::vector<std::string>& names);
/// CSV columns: finger, theta1_deg, theta2_deg.
void write_posture_csv(std::ostream& os, const PostureSnapshot& s);
PostureSnapshot read_posture_csv(std::istream& is);

}  // namespace psf
