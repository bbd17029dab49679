// JSON forms of the trajectory and posture tables, and file checksums.
#pragma once

#include "psf/control.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace psf {

/// {"states": [{"x_mm", "theta1_deg", "theta2_deg", "dx_sb_mm", "tension_N"}, ...]}
void write_trajectory_json(std::ostream& os, const Trajectory& t);
Trajectory read_trajectory_json(std::istream& is);

/// {"timestamp_s", "fingers": [{"finger", "theta1_deg", "theta2_deg"}, ...]}
void write_posture_json(std::ostream& os, const PostureSnapshot& s);
PostureSnapshot read_posture_json(std::istream& is);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace psf
