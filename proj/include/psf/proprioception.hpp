// Proprioceptive estimation from SEA tension: contact detection against a
// free-flexion reference, joint-angle estimation, slope metrics, stiffness
// classification and disturbance detection.
#pragma once

#include "psf/model.hpp"
#include "psf/signal.hpp"
#include "psf/solver.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

namespace psf {

struct DetectorConfig {
  std::size_t window = 50;  // samples
  double rate = 1000.0;     // Hz
  double r_prox = 0.4;      // N
  double r_dist = 1.0;      // N
  double s_load = 2.0;      // N/mm
  double s_rigid = 0.8 * 8.0;  // N/mm
  double s_instab = 0.05;      // N/mm
  double slope_delay = 0.075;  // s
  // Causal moving average applied to measured and reference tension
  // before comparison; 1 disables it.
  std::size_t filter_window = 24;
  // Post-contact samples of loading after which a finger with no rigid or
  // unstable window is declared soft.
  std::size_t classify_span = 100;

  void validate(const SeaParams& s) const;
  static DetectorConfig for_sea(const SeaParams& s);
  std::size_t delay_samples() const;
};

enum class ContactKind { proximal, distal };
const char* to_string(ContactKind k);

struct ContactEvent {
  ContactKind kind = ContactKind::proximal;
  std::size_t sample = 0;    // window midpoint, index into the signal
  double x_c = 0.0;          // mm
  double theta1 = 0.0;       // rad
  double theta2 = 0.0;       // rad
  std::size_t crossing = 0;  // sample at which the threshold was crossed
  std::size_t decided = 0;   // sample at which the event was committed
  std::optional<double> confirm_slope;  // N/mm, for first-threshold events
};

/// Offset-corrected RMSE per window start position.
struct RmseSeries {
  std::vector<double> value;
  std::vector<bool> valid;  // false where the window leaves the reference range
};

RmseSeries rmse_series(const SampledSignal& signal, const Trajectory& reference,
                       const DetectorConfig& cfg);

/// Linear interpolation of the reference at x_c (RangeError outside).
Vec2 estimate_joint_angles(double x_c, const Trajectory& reference);
/// Same, with theta1 frozen at a proximal contact estimate and the rest of
/// the tendon length at x_c attributed to theta2.
Vec2 estimate_joint_angles(double x_c, const Trajectory& reference, double frozen_theta1,
                           const FingerParams& p);

/// Angles for a contact at signal sample k: the tendon length drawn into
/// the joints (x − F/k_sea) is located on the reference and interpolated
/// there; theta1 stays frozen after a proximal event. A proximal contact
/// leaves the distal phalanx free, so its PIP angle is read from tension.
Vec2 estimate_contact_angles(const SampledSignal& signal, std::size_t k,
                             const Trajectory& reference, const FingerParams& p,
                             const SeaParams& s, const DetectorConfig& cfg, ContactKind kind,
                             std::optional<double> frozen_theta1 = std::nullopt);

/// Streaming detector fed one sample at a time. Samples that do not
/// advance the excursion (paused actuator) are ignored.
class ContactDetector {
 public:
  ContactDetector(Trajectory reference, FingerParams p, SeaParams s, DetectorConfig cfg);

  /// Consumes sample index k of a signal; returns an event finalized by it.
  std::optional<ContactEvent> push(const SampledSignal& signal, std::size_t k);
  /// Consumes every sample not yet seen.
  void consume(const SampledSignal& signal);

  bool crossed() const { return first_crossing_.has_value(); }
  std::optional<std::size_t> first_crossing() const { return first_crossing_; }
  bool distal_found() const;
  const std::vector<ContactEvent>& events() const { return events_; }
  const Trajectory& reference() const { return ref_; }
  std::size_t seen() const { return seen_; }

 private:
  enum class Stage { prox_search, confirming, dist_search, done };

  double rmse_at(std::size_t end) const;

  Trajectory ref_;
  FingerParams p_;
  SeaParams s_;
  DetectorConfig cfg_;
  std::size_t seen_ = 0;
  // Accepted (advancing) samples.
  std::vector<std::size_t> index_;
  std::vector<double> x_;
  std::vector<double> f_;  // filtered measured tension
  std::vector<double> r_;  // filtered reference tension
  std::vector<double> raw_f_;
  std::vector<double> raw_r_;
  Stage stage_ = Stage::prox_search;
  std::size_t pending_mid_ = 0;
  std::size_t pending_cross_ = 0;
  std::size_t resume_from_ = 0;  // first accepted index a dist-search window may start at
  std::optional<std::size_t> first_crossing_;
  std::optional<double> frozen_theta1_;
  std::vector<ContactEvent> events_;
};

/// Offline detection over a whole signal.
std::vector<ContactEvent> detect_contacts(const SampledSignal& signal, const Trajectory& reference,
                                          const FingerParams& p, const SeaParams& s,
                                          const DetectorConfig& cfg);

struct SlopeMetrics {
  double global_slope = 0.0;        // N/mm
  std::vector<double> local_slopes;  // N/mm, one per full trailing window
  bool undefined = false;            // no excursion progress since contact
};

/// Slopes from a distal event to the end of the signal. Endpoint tensions
/// of the global slope are averaged over filter_window samples inside the
/// post-contact span.
SlopeMetrics slope_metrics(const SampledSignal& signal, const ContactEvent& distal_event,
                           const DetectorConfig& cfg);

/// Least-squares slope of tension over excursion on [begin, end).
std::optional<double> least_squares_slope(const std::vector<double>& x,
                                          const std::vector<double>& f, std::size_t begin,
                                          std::size_t end);

enum class StiffnessClass { rigid, soft, instability_halt };
const char* to_string(StiffnessClass c);

StiffnessClass classify_stiffness(const SlopeMetrics& m, const DetectorConfig& cfg);

enum class DisturbanceClass { none, forced_extension, flexion_or_support_loss };
const char* to_string(DisturbanceClass c);

struct DisturbanceDetection {
  DisturbanceClass kind = DisturbanceClass::none;
  std::optional<std::size_t> sample;  // first sample outside the deadband
  double deviation = 0.0;             // N, filtered, at that sample (or largest seen)
};

/// Classifies a tension series recorded with the actuator paused.
DisturbanceDetection detect_disturbance(const std::vector<double>& tension, double baseline,
                                        double deadband, std::size_t filter_window = 24);

/// JSON report: events (angles in degrees), slopes and classification.
void write_detection_report(std::ostream& os, const std::vector<ContactEvent>& events,
                            const std::optional<SlopeMetrics>& slopes,
                            const std::optional<StiffnessClass>& stiffness);

struct DetectionReport {
  std::vector<ContactEvent> events;
  std::optional<SlopeMetrics> slopes;
  std::optional<StiffnessClass> stiffness;
};

/// Reads what write_detection_report wrote; throws ParameterError on
/// malformed input.
DetectionReport read_detection_report(std::istream& is);

}  // namespace psf
