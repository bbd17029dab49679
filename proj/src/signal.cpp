#include "psf/signal.hpp"

#include "psf/model.hpp"

#include <json.hpp>

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace psf {

using nlohmann::json;

const char* to_string(DisturbanceKind k) {
  switch (k) {
    case DisturbanceKind::forced_extension: return "forced-extension";
    case DisturbanceKind::forced_flexion: return "forced-flexion";
    case DisturbanceKind::support_loss: return "support-loss";
  }
  return "unknown";
}

DisturbanceKind disturbance_kind_from_string(const std::string& s) {
  if (s == "forced-extension") return DisturbanceKind::forced_extension;
  if (s == "forced-flexion") return DisturbanceKind::forced_flexion;
  if (s == "support-loss") return DisturbanceKind::support_loss;
  throw ParameterError("unknown disturbance kind '" + s + "'");
}

void SampledSignal::append(double x_mm, double tension_n, double theta1, double theta2) {
  t.push_back(static_cast<double>(t.size()) / rate);
  x.push_back(x_mm);
  tension.push_back(tension_n);
  truth.theta1.push_back(theta1);
  truth.theta2.push_back(theta2);
}

void write_signal_csv(std::ostream& os, const SampledSignal& s) {
  os << "sample,t_s,x_mm,tension_N,theta1_true_deg,theta2_true_deg\n";
  char buf[256];
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double a = i < s.truth.theta1.size() ? s.truth.theta1[i] : 0.0;
    const double b = i < s.truth.theta2.size() ? s.truth.theta2[i] : 0.0;
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", i, s.t[i], s.x[i],
                  s.tension[i], rad2deg(a), rad2deg(b));
    os << buf;
  }
}

void write_signal_annotation(std::ostream& os, const SampledSignal& s) {
  json j;
  j["rate_hz"] = s.rate;
  j["samples"] = s.size();
  j["proximal_contact"] = s.truth.proximal_contact ? json(*s.truth.proximal_contact) : json(nullptr);
  j["distal_contact"] = s.truth.distal_contact ? json(*s.truth.distal_contact) : json(nullptr);
  j["disturbances"] = json::array();
  for (const DisturbanceWindow& w : s.truth.disturbances) {
    j["disturbances"].push_back({{"start", w.start},
                                 {"end", w.end},
                                 {"kind", to_string(w.kind)},
                                 {"magnitude_rad", w.magnitude},
                                 {"clamped", w.clamped}});
  }
  j["notes"] = s.truth.notes;
  j["ended_early"] = s.truth.ended_early;
  os << j.dump(2) << "\n";
}

SampledSignal read_signal(std::istream& csv, std::istream& annotation) {
  SampledSignal s;
  json j;
  try {
    annotation >> j;
    s.rate = j.at("rate_hz").get<double>();
    if (!j.at("proximal_contact").is_null())
      s.truth.proximal_contact = j["proximal_contact"].get<std::size_t>();
    if (!j.at("distal_contact").is_null())
      s.truth.distal_contact = j["distal_contact"].get<std::size_t>();
    for (const json& w : j.at("disturbances")) {
      s.truth.disturbances.push_back({w.at("start").get<std::size_t>(), w.at("end").get<std::size_t>(),
                                      disturbance_kind_from_string(w.at("kind").get<std::string>()),
                                      w.at("magnitude_rad").get<double>(), w.at("clamped").get<bool>()});
    }
    s.truth.notes = j.at("notes").get<std::vector<std::string>>();
    s.truth.ended_early = j.at("ended_early").get<bool>();
  } catch (const json::exception& e) {
    throw ParameterError(std::string("signal annotation: ") + e.what());
  }

  std::string line;
  std::getline(csv, line);
  if (line.rfind("sample,", 0) != 0) throw ParameterError("signal CSV: unexpected header");
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    double v[6];
    std::istringstream ls(line);
    std::string cell;
    int k = 0;
    while (k < 6 && std::getline(ls, cell, ',')) v[k++] = std::stod(cell);
    if (k != 6) throw ParameterError("signal CSV: expected 6 columns");
    s.t.push_back(v[1]);
    s.x.push_back(v[2]);
    s.tension.push_back(v[3]);
    s.truth.theta1.push_back(deg2rad(v[4]));
    s.truth.theta2.push_back(deg2rad(v[5]));
  }
  return s;
}

}  // namespace psf
