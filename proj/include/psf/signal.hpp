// Sampled actuator signals with ground-truth annotations.
#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace psf {

enum class DisturbanceKind { forced_extension, forced_flexion, support_loss };

const char* to_string(DisturbanceKind k);
DisturbanceKind disturbance_kind_from_string(const std::string& s);

/// Disturbance interval in sample indices, [start, end).
struct DisturbanceWindow {
  std::size_t start = 0;
  std::size_t end = 0;
  DisturbanceKind kind = DisturbanceKind::forced_extension;
  double magnitude = 0.0;  // rad actually imposed
  bool clamped = false;
};

struct SignalTruth {
  std::optional<std::size_t> proximal_contact;
  std::optional<std::size_t> distal_contact;
  std::vector<double> theta1;
  std::vector<double> theta2;
  std::vector<DisturbanceWindow> disturbances;
  std::vector<std::string> notes;
  bool ended_early = false;
};

/// Uniformly sampled (time, excursion, tension) series of one finger.
struct SampledSignal {
  double rate = 1000.0;  // Hz
  std::vector<double> t;
  std::vector<double> x;
  std::vector<double> tension;
  SignalTruth truth;

  std::size_t size() const { return t.size(); }
  bool empty() const { return t.empty(); }
  void append(double x_mm, double tension_n, double theta1, double theta2);
};

/// CSV columns: sample, t_s, x_mm, tension_N, theta1_true_deg, theta2_true_deg.
void write_signal_csv(std::ostream& os, const SampledSignal& s);
/// JSON sidecar with the rate and every annotation.
void write_signal_annotation(std::ostream& os, const SampledSignal& s);
/// Rebuilds a signal from its CSV and sidecar.
SampledSignal read_signal(std::istream& csv, std::istream& annotation);

}  // namespace psf
