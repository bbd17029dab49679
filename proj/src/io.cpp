#include "psf/io.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>

namespace psf {

using nlohmann::json;

void write_trajectory_json(std::ostream& os, const Trajectory& t) {
  json j;
  j["states"] = json::array();
  for (const FingerState& s : t.states)
    j["states"].push_back({{"x_mm", s.x},
                           {"theta1_deg", rad2deg(s.theta1)},
                           {"theta2_deg", rad2deg(s.theta2)},
                           {"dx_sb_mm", s.dx_sb},
                           {"tension_N", s.tension}});
  os << j.dump(1) << '\n';
}

Trajectory read_trajectory_json(std::istream& is) {
  Trajectory t;
  try {
    for (const json& s : json::parse(is).at("states"))
      t.states.push_back({deg2rad(s.at("theta1_deg").get<double>()),
                          deg2rad(s.at("theta2_deg").get<double>()), s.at("x_mm").get<double>(),
                          s.at("dx_sb_mm").get<double>(), s.at("tension_N").get<double>()});
  } catch (const json::exception& e) {
    throw ParameterError(std::string("trajectory JSON: ") + e.what());
  }
  return t;
}

void write_posture_json(std::ostream& os, const PostureSnapshot& s) {
  json j;
  j["timestamp_s"] = s.timestamp;
  j["fingers"] = json::array();
  for (std::size_t i = 0; i < s.names.size(); ++i)
    j["fingers"].push_back({{"finger", s.names[i]},
                            {"theta1_deg", rad2deg(s.angles[i].x())},
                            {"theta2_deg", rad2deg(s.angles[i].y())}});
  os << j.dump(2) << '\n';
}

PostureSnapshot read_posture_json(std::istream& is) {
  PostureSnapshot s;
  try {
    const json j = json::parse(is);
    s.timestamp = j.at("timestamp_s").get<double>();
    for (const json& f : j.at("fingers")) {
      s.names.push_back(f.at("finger").get<std::string>());
      s.angles.emplace_back(deg2rad(f.at("theta1_deg").get<double>()),
                            deg2rad(f.at("theta2_deg").get<double>()));
    }
  } catch (const json::exception& e) {
    throw ParameterError(std::string("posture JSON: ") + e.what());
  }
  return s;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParameterError("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf;
  while (in.read(buf.data(), buf.size()) || in.gcount() > 0)
    EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  std::array<unsigned char, EVP_MAX_MD_SIZE> md;
  unsigned int n = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &n);
  std::string hex;
  char b[3];
  for (unsigned int i = 0; i < n; ++i) {
    std::snprintf(b, sizeof b, "%02x", md[i]);
    hex += b;
  }
  return hex;
}

}  // namespace psf
