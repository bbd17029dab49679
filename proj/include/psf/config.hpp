// TOML parameter files. Angles are written in degrees and converted on
// load; everything else uses the library units.
//
//   [sea]              k_sea, x_sb_max, f_max, cable_speed
//   [hand]             preset = "default" | "single", orientation =
//                      "palm-sideways" | "palm-down", or g_dir = [x, y, z]
//   [finger.<name>]    FingerParams fields and mount (origin, heading,
//                      mirror, z); overrides a preset finger of that name
//                      or appends a new one
//   [solver]           excursion_step, angle_tol, max_iter, warm_start
//   [detector]         DetectorConfig fields
//   [control]          target_tension, hold_deadband, strategy, settle
//
// Grasp scenario files:
//
//   name, noise_sigma, strategy, max_samples, hand = "config" | "single"
//   [object]           preset = "distal" | "adaptive" | "pinch" | "catalog"
//                      with frac, offset_deg, back, label, or explicit
//                      shape, center, radius, ...; stiffness = "soft" plus
//                      k_obj. No [object] table means free flexion.
//   [[schedule]]       finger, start (s), x_end (mm)
//
// Blind scene files:
//
//   length
//   [sweep]            speed, preload, magnitude, deadband, sensing_finger
//   [[object]]         label, along, side = "palmar" | "dorsal"
#pragma once

#include "psf/control.hpp"
#include "psf/recognition.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace psf {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct Config {
  HandModel hand = default_hand();
  SolveConfig solver = SolveConfig::for_sea(hand.sea);
  DetectorConfig detector = DetectorConfig::for_sea(hand.sea);
  ControlConfig control;
};

Config parse_config(std::string_view text, const std::string& source = "<config>");
Config load_config(const std::filesystem::path& path);

struct GraspScenario {
  std::string name;
  GraspSetup setup;  // noise seed left for the caller
};

/// Builds the run on top of `base`; the pinch preset replaces the hand.
GraspScenario parse_scenario(std::string_view text, const Config& base,
                             const std::string& source = "<scenario>");
GraspScenario load_scenario(const std::filesystem::path& path, const Config& base);

struct SceneFile {
  BlindScene scene;
  SweepConfig sweep;
};

SceneFile parse_scene(std::string_view text, const std::string& source = "<scene>");
SceneFile load_scene(const std::filesystem::path& path);

}  // namespace psf
