// Blind grasping: grasp features, k-NN object recognition and the
// palmar/dorsal sweep that finds an object before grasping it.
#pragma once

#include "psf/control.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace psf {

inline constexpr std::size_t kFeatureDim = 10;

/// Nine joint angles (rad) in hand finger order, then the global slope
/// (N/mm) averaged over fingers with distal contact.
struct FeatureVector {
  std::array<double, kFeatureDim> v{};

  double slope() const { return v[kFeatureDim - 1]; }
  bool operator==(const FeatureVector&) const = default;
};

class NoGraspError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws NoGraspError when no finger made distal contact and
/// ParameterError when the hand does not have exactly nine joints.
FeatureVector extract_features(const PostureSnapshot& posture, const HandModel& hand,
                               const std::vector<std::optional<SlopeMetrics>>& slopes);

struct LabeledSample {
  FeatureVector f;
  std::string label;
};

struct LabeledDataset {
  std::vector<LabeledSample> samples;

  std::size_t size() const { return samples.size(); }
  std::map<std::string, std::size_t> counts() const;
};

/// Zero-mean, unit-variance scaling fitted on training data.
struct Standardizer {
  std::array<double, kFeatureDim> mean{};
  std::array<double, kFeatureDim> scale{};

  static Standardizer fit(const LabeledDataset& d);
  FeatureVector apply(const FeatureVector& f) const;
};

struct KnnResult {
  std::string label;
  std::size_t votes = 0;  // neighbors agreeing with the label
  std::size_t k = 0;
  std::vector<std::size_t> neighbors;  // dataset indices, nearest first
};

/// Majority label among the k nearest samples (Euclidean distance on
/// standardized features). A tie goes to the label of the nearest
/// neighbor among the tied labels.
KnnResult knn_classify(const FeatureVector& query, const LabeledDataset& data, std::size_t k = 3,
                       bool standardize = true);

struct LeaveOutReport {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total ? static_cast<double>(correct) / total : 0.0; }
};

/// Holds out consecutive pairs of samples within each label, trains on
/// the rest and classifies both.
LeaveOutReport leave_two_out(const LabeledDataset& d, std::size_t k = 3);

/// One entry of the recognition object set.
struct CatalogObject {
  std::string label;     // e.g. "cylinder-r20-soft"; suffix rigid, soft or medium
  std::string geometry;  // label without the stiffness part
  ObjectModel object;    // center is relative to the grasp center
};

/// Seventeen objects over eight geometries: cylinders of radius 15, 20, 25,
/// 30 mm, cones of base radius 20 and 28 mm (taper -0.25) and spheres of
/// radius 30 and 36 mm, each rigid and soft (k_obj = 0.5 N/mm), plus a
/// medium 25 mm cylinder (k_obj = 2 N/mm).
std::vector<CatalogObject> object_catalog();
std::string geometry_of(const std::string& label);

struct RecognitionSetup {
  HandModel hand = default_hand();
  SolveConfig solver = SolveConfig::for_sea(hand.sea);
  DetectorConfig detector = DetectorConfig::for_sea(hand.sea);
  ControlConfig control;
  Vec2 grasp_center{42.0, -40.0};  // hand frame, mm
  double jitter = 1.5;             // mm, uniform per axis
  double noise_sigma = 0.2;        // N
};

/// Grasps the object once at a seeded jittered position.
GraspOutcome grasp_object(const ObjectModel& object, const RecognitionSetup& setup,
                          std::uint64_t seed);
FeatureVector grasp_features(const ObjectModel& object, const RecognitionSetup& setup,
                             std::uint64_t seed);

/// Trials per catalog object, seeded per trial so the result does not
/// depend on thread count.
LabeledDataset generate_dataset(const std::vector<CatalogObject>& catalog,
                                const RecognitionSetup& setup, std::size_t trials,
                                std::uint64_t seed, unsigned threads = 0);

/// Grasps every catalog geometry with the stiffness swapped for each of
/// `k_obj` (<= 0 means rigid) and counts queries whose k-NN label has the
/// right geometry, whatever its stiffness.
LeaveOutReport geometry_consistency(const std::vector<CatalogObject>& catalog,
                                    const LabeledDataset& data, const RecognitionSetup& setup,
                                    const std::vector<double>& k_obj, std::size_t trials,
                                    std::uint64_t seed, std::size_t k = 3);

/// CSV: nine angle columns in degrees, avg_slope_N_per_mm, label.
void write_dataset_csv(std::ostream& os, const LabeledDataset& d, const HandModel& hand);
LabeledDataset read_dataset_csv(std::istream& is);

enum class SweepSide { palmar, dorsal };
const char* to_string(SweepSide s);
SweepSide sweep_side_from_string(const std::string& s);

struct ScenePlacement {
  std::string label;  // catalog label
  double along = 0.0;  // mm along the sweep line
  SweepSide side = SweepSide::palmar;
};

struct BlindScene {
  double length = 300.0;  // mm
  std::vector<ScenePlacement> objects;
};

struct SweepConfig {
  double speed = 50.0;       // mm/s
  double preload = 2.5;      // N
  double magnitude = 0.1;    // rad imposed on the sensing finger's MCP
  double deadband = 0.3;     // N
  std::size_t sensing_finger = 1;
};

struct SweepRecord {
  int sweep = 0;  // 1, 2, 3
  SweepSide side = SweepSide::palmar;
  DisturbanceDetection detection;
};

struct BlindResult {
  bool found = false;
  std::vector<SweepRecord> sweeps;
  std::optional<SweepSide> side;  // side of the detected contact
  std::optional<double> position;  // mm along the line
  std::string approach;            // "front" or "behind"
  std::string truth_label;
  std::optional<GraspOutcome> grasp;
  std::optional<FeatureVector> features;
  std::optional<KnnResult> result;
};

/// Palmar, dorsal, palmar sweeps with the sensing finger preloaded; the
/// first detected contact triggers an approach, a controlled grasp and
/// classification against the dataset.
BlindResult blind_sweep(const BlindScene& scene, const std::vector<CatalogObject>& catalog,
                        const LabeledDataset& data, const RecognitionSetup& setup,
                        const SweepConfig& sweep, std::uint64_t seed);

}  // namespace psf
