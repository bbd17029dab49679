#include "psf/proprioception.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>

namespace psf {
namespace {

std::vector<double> causal_mean(const std::vector<double>& v, std::size_t m) {
  std::vector<double> out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    sum += v[i];
    if (i >= m) sum -= v[i - m];
    out[i] = sum / static_cast<double>(std::min(i + 1, m));
  }
  return out;
}

double offset_corrected_rmse(const std::vector<double>& f, const std::vector<double>& r,
                             std::size_t start, std::size_t w) {
  double acc = 0.0;
  for (std::size_t k = start; k < start + w; ++k) {
    const double e = (f[k] - f[start]) - (r[k] - r[start]);
    acc += e * e;
  }
  return std::sqrt(acc / static_cast<double>(w));
}

Vec2 clamp_to_rom(Vec2 th, const FingerParams& p) {
  th.x() = std::clamp(th.x(), p.min_angle(1), p.max_angle(1));
  th.y() = std::clamp(th.y(), p.min_angle(2), p.max_angle(2));
  return th;
}

}  // namespace

void DetectorConfig::validate(const SeaParams& s) const {
  if (window < 2) throw ParameterError("detector.window must be >= 2");
  if (filter_window < 1) throw ParameterError("detector.filter_window must be >= 1");
  if (!(rate > 0.0 && r_prox > 0.0 && r_dist > 0.0 && s_load > 0.0 && s_rigid > 0.0 &&
        s_instab > 0.0 && slope_delay > 0.0))
    throw ParameterError("detector thresholds must be positive");
  if (!(s_instab < s_rigid && s_rigid <= s.k_sea))
    throw ParameterError("detector needs s_instab < s_rigid <= k_sea");
}

DetectorConfig DetectorConfig::for_sea(const SeaParams& s) {
  DetectorConfig c;
  c.s_rigid = 0.8 * s.k_sea;
  return c;
}

std::size_t DetectorConfig::delay_samples() const {
  return static_cast<std::size_t>(std::llround(slope_delay * rate));
}

const char* to_string(ContactKind k) { return k == ContactKind::proximal ? "proximal" : "distal"; }

RmseSeries rmse_series(const SampledSignal& signal, const Trajectory& reference,
                       const DetectorConfig& cfg) {
  RmseSeries out;
  const std::size_t n = signal.size();
  const std::size_t w = cfg.window;
  if (n < w || reference.empty()) return out;
  std::vector<double> ref(n, 0.0);
  std::vector<bool> inside(n, false);
  for (std::size_t k = 0; k < n; ++k) {
    if (signal.x[k] < reference.x_min() || signal.x[k] > reference.x_max()) continue;
    ref[k] = reference.at(signal.x[k]).tension;
    inside[k] = true;
  }
  const std::vector<double> f = causal_mean(signal.tension, cfg.filter_window);
  const std::vector<double> r = causal_mean(ref, cfg.filter_window);
  out.value.assign(n - w + 1, 0.0);
  out.valid.assign(n - w + 1, true);
  std::size_t bad = 0;  // samples outside the reference in the current window
  for (std::size_t k = 0; k < w; ++k) bad += inside[k] ? 0 : 1;
  for (std::size_t s = 0; s + w <= n; ++s) {
    if (s > 0) {
      bad -= inside[s - 1] ? 0 : 1;
      bad += inside[s + w - 1] ? 0 : 1;
    }
    // Windows starting before the filter has filled see unfiltered noise.
    out.valid[s] = bad == 0 && s + 1 >= cfg.filter_window;
    out.value[s] = out.valid[s] ? offset_corrected_rmse(f, r, s, w) : 0.0;
  }
  return out;
}

Vec2 estimate_joint_angles(double x_c, const Trajectory& reference) {
  const FingerState st = reference.at(x_c);
  return {st.theta1, st.theta2};
}

Vec2 estimate_joint_angles(double x_c, const Trajectory& reference, double frozen_theta1,
                           const FingerParams& p) {
  const FingerState st = reference.at(x_c);
  const double ell = p.r1 * st.theta1 + p.r2 * st.theta2;
  if (p.single_joint()) return clamp_to_rom({frozen_theta1, 0.0}, p);
  return clamp_to_rom({frozen_theta1, (ell - p.r1 * frozen_theta1) / p.r2}, p);
}

namespace {

// PIP angle where the reference first carries tension f.
double pip_angle_for_tension(double f, const Trajectory& ref) {
  const auto& st = ref.states;
  if (f <= st.front().tension) return st.front().theta2;
  for (std::size_t i = 1; i < st.size(); ++i) {
    if (st[i].tension >= f) {
      const double t = (f - st[i - 1].tension) / (st[i].tension - st[i - 1].tension);
      return st[i - 1].theta2 + t * (st[i].theta2 - st[i - 1].theta2);
    }
  }
  return st.back().theta2;
}

}  // namespace

Vec2 estimate_contact_angles(const SampledSignal& signal, std::size_t k,
                             const Trajectory& reference, const FingerParams& p,
                             const SeaParams& s, const DetectorConfig& cfg, ContactKind kind,
                             std::optional<double> frozen_theta1) {
  const std::size_t half = cfg.filter_window / 2;
  const std::size_t lo = k >= half ? k - half : 0;
  const std::size_t hi = std::min(signal.size(), k + half + 1);
  double xs = 0.0, fs = 0.0;
  for (std::size_t i = lo; i < hi; ++i) {
    xs += signal.x[i];
    fs += signal.tension[i];
  }
  const double cnt = static_cast<double>(hi - lo);
  const double ell = xs / cnt - fs / cnt / s.k_sea;

  if (frozen_theta1) {
    if (p.single_joint()) return clamp_to_rom({*frozen_theta1, 0.0}, p);
    return clamp_to_rom({*frozen_theta1, (ell - p.r1 * *frozen_theta1) / p.r2}, p);
  }
  if (kind == ContactKind::proximal && !p.single_joint()) {
    // The distal phalanx is still free, so the PIP angle follows the
    // tension through its spring as on the reference; the MCP takes the
    // rest of the drawn length.
    const double th2 = pip_angle_for_tension(fs / cnt, reference);
    return clamp_to_rom({(ell - p.r2 * th2) / p.r1, th2}, p);
  }
  double x_eq;
  try {
    x_eq = reference.excursion_for_length(ell, p);
  } catch (const RangeError&) {
    x_eq = reference.x_max();
  }
  return clamp_to_rom(estimate_joint_angles(x_eq, reference), p);
}

ContactDetector::ContactDetector(Trajectory reference, FingerParams p, SeaParams s,
                                 DetectorConfig cfg)
    : ref_(std::move(reference)), p_(std::move(p)), s_(s), cfg_(cfg) {
  cfg_.validate(s_);
  if (ref_.empty()) throw ParameterError("detector needs a non-empty reference");
}

bool ContactDetector::distal_found() const {
  return std::any_of(events_.begin(), events_.end(),
                     [](const ContactEvent& e) { return e.kind == ContactKind::distal; });
}

double ContactDetector::rmse_at(std::size_t end) const {
  const std::size_t w = cfg_.window;
  return offset_corrected_rmse(f_, r_, end + 1 - w, w);
}

std::optional<ContactEvent> ContactDetector::push(const SampledSignal& signal, std::size_t k) {
  if (k != seen_) throw ParameterError("detector samples must be pushed in order");
  seen_ = k + 1;
  const double x = signal.x[k];
  if (!x_.empty() && x <= x_.back()) return std::nullopt;
  if (x < ref_.x_min() || x > ref_.x_max()) return std::nullopt;

  const std::size_t m = cfg_.filter_window;
  index_.push_back(k);
  x_.push_back(x);
  raw_f_.push_back(signal.tension[k]);
  raw_r_.push_back(ref_.at(x).tension);
  const std::size_t i = x_.size() - 1;
  const std::size_t from = i + 1 >= m ? i + 1 - m : 0;
  double sf = 0.0, sr = 0.0;
  for (std::size_t j = from; j <= i; ++j) {
    sf += raw_f_[j];
    sr += raw_r_[j];
  }
  f_.push_back(sf / static_cast<double>(i + 1 - from));
  r_.push_back(sr / static_cast<double>(i + 1 - from));

  const std::size_t w = cfg_.window;
  auto make_event = [&](ContactKind kind, std::size_t mid, std::size_t cross) {
    ContactEvent ev;
    ev.kind = kind;
    ev.sample = index_[mid];
    ev.x_c = x_[mid];
    ev.crossing = cross;
    ev.decided = k;
    const Vec2 th = estimate_contact_angles(signal, ev.sample, ref_, p_, s_, cfg_, kind, frozen_theta1_);
    ev.theta1 = th.x();
    ev.theta2 = th.y();
    return ev;
  };

  switch (stage_) {
    case Stage::prox_search:
      if (i + 2 >= w + m && rmse_at(i) > cfg_.r_prox) {
        first_crossing_ = k;
        pending_mid_ = i + 1 - w + w / 2;
        pending_cross_ = i;
        stage_ = Stage::confirming;
      }
      break;
    case Stage::confirming:
      if (i >= pending_cross_ + cfg_.delay_samples()) {
        const double gs = (f_[i] - f_[pending_mid_]) / (x_[i] - x_[pending_mid_]);
        const ContactKind kind =
            gs < cfg_.s_load && !p_.single_joint() ? ContactKind::proximal : ContactKind::distal;
        ContactEvent ev = make_event(kind, pending_mid_, index_[pending_cross_]);
        ev.confirm_slope = gs;
        if (kind == ContactKind::proximal) {
          frozen_theta1_ = ev.theta1;
          stage_ = Stage::dist_search;
          resume_from_ = i + 1;
        } else {
          stage_ = Stage::done;
        }
        events_.push_back(ev);
        return ev;
      }
      break;
    case Stage::dist_search:
      if (i + 2 >= w + m && i + 1 - w >= resume_from_ && rmse_at(i) > cfg_.r_dist) {
        ContactEvent ev = make_event(ContactKind::distal, i + 1 - w + w / 2, k);
        stage_ = Stage::done;
        events_.push_back(ev);
        return ev;
      }
      break;
    case Stage::done:
      break;
  }
  return std::nullopt;
}

void ContactDetector::consume(const SampledSignal& signal) {
  while (seen_ < signal.size()) push(signal, seen_);
}

std::vector<ContactEvent> detect_contacts(const SampledSignal& signal, const Trajectory& reference,
                                          const FingerParams& p, const SeaParams& s,
                                          const DetectorConfig& cfg) {
  ContactDetector det(reference, p, s, cfg);
  det.consume(signal);
  return det.events();
}

std::optional<double> least_squares_slope(const std::vector<double>& x,
                                          const std::vector<double>& f, std::size_t begin,
                                          std::size_t end) {
  if (end <= begin + 1) return std::nullopt;
  const double n = static_cast<double>(end - begin);
  double mx = 0.0, mf = 0.0;
  for (std::size_t k = begin; k < end; ++k) {
    mx += x[k];
    mf += f[k];
  }
  mx /= n;
  mf /= n;
  double sxx = 0.0, sxf = 0.0;
  for (std::size_t k = begin; k < end; ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxf += (x[k] - mx) * (f[k] - mf);
  }
  if (sxx <= 0.0) return std::nullopt;
  return sxf / sxx;
}

SlopeMetrics slope_metrics(const SampledSignal& signal, const ContactEvent& distal_event,
                           const DetectorConfig& cfg) {
  SlopeMetrics m;
  std::vector<double> xs, fs;
  for (std::size_t k = distal_event.sample; k < signal.size(); ++k) {
    if (!xs.empty() && signal.x[k] <= xs.back()) continue;
    xs.push_back(signal.x[k]);
    fs.push_back(signal.tension[k]);
  }
  if (xs.size() < 2) {
    m.undefined = true;
    return m;
  }
  const std::size_t span = std::min(cfg.filter_window, xs.size() / 2);
  const std::size_t avg = std::max<std::size_t>(span, 1);
  double x0 = 0.0, f0 = 0.0, x1 = 0.0, f1 = 0.0;
  for (std::size_t k = 0; k < avg; ++k) {
    x0 += xs[k];
    f0 += fs[k];
    x1 += xs[xs.size() - 1 - k];
    f1 += fs[fs.size() - 1 - k];
  }
  const double dx = (x1 - x0) / static_cast<double>(avg);
  if (dx <= 1e-12) {
    m.undefined = true;
    return m;
  }
  m.global_slope = (f1 - f0) / static_cast<double>(avg) / dx;
  for (std::size_t e = cfg.window; e <= xs.size(); ++e) {
    if (auto s = least_squares_slope(xs, fs, e - cfg.window, e)) m.local_slopes.push_back(*s);
  }
  return m;
}

const char* to_string(StiffnessClass c) {
  switch (c) {
    case StiffnessClass::rigid: return "rigid";
    case StiffnessClass::soft: return "soft";
    case StiffnessClass::instability_halt: return "instability-halt";
  }
  return "unknown";
}

StiffnessClass classify_stiffness(const SlopeMetrics& m, const DetectorConfig& cfg) {
  std::vector<double> slopes = m.local_slopes;
  if (slopes.empty() && !m.undefined) slopes.push_back(m.global_slope);
  for (double s : slopes)
    if (s > cfg.s_rigid) return StiffnessClass::rigid;
  for (double s : slopes)
    if (s < cfg.s_instab) return StiffnessClass::instability_halt;
  return StiffnessClass::soft;
}

const char* to_string(DisturbanceClass c) {
  switch (c) {
    case DisturbanceClass::none: return "none";
    case DisturbanceClass::forced_extension: return "forced-extension";
    case DisturbanceClass::flexion_or_support_loss: return "forced-flexion-or-support-loss";
  }
  return "unknown";
}

DisturbanceDetection detect_disturbance(const std::vector<double>& tension, double baseline,
                                        double deadband, std::size_t filter_window) {
  DisturbanceDetection d;
  const std::size_t m = std::max<std::size_t>(filter_window, 1);
  const std::vector<double> f = causal_mean(tension, m);
  // A partial window at the start is too noisy to trust.
  for (std::size_t k = m - 1; k < f.size(); ++k) {
    const double dev = f[k] - baseline;
    if (std::abs(dev) > deadband) {
      d.kind = dev > 0.0 ? DisturbanceClass::forced_extension
                         : DisturbanceClass::flexion_or_support_loss;
      d.sample = k;
      d.deviation = dev;
      return d;
    }
    if (std::abs(dev) > std::abs(d.deviation)) d.deviation = dev;
  }
  return d;
}

void write_detection_report(std::ostream& os, const std::vector<ContactEvent>& events,
                            const std::optional<SlopeMetrics>& slopes,
                            const std::optional<StiffnessClass>& stiffness) {
  using nlohmann::json;
  json j;
  j["events"] = json::array();
  for (const ContactEvent& e : events) {
    json je{{"kind", to_string(e.kind)},
            {"sample", e.sample},
            {"crossing_sample", e.crossing},
            {"decided_sample", e.decided},
            {"x_c_mm", e.x_c},
            {"theta1_deg", rad2deg(e.theta1)},
            {"theta2_deg", rad2deg(e.theta2)}};
    if (e.confirm_slope) je["confirm_slope_N_per_mm"] = *e.confirm_slope;
    j["events"].push_back(je);
  }
  if (slopes) {
    j["global_slope_N_per_mm"] = slopes->undefined ? json(nullptr) : json(slopes->global_slope);
    j["local_slopes_N_per_mm"] = slopes->local_slopes;
  }
  j["classification"] = stiffness ? json(to_string(*stiffness)) : json(nullptr);
  os << j.dump(2) << "\n";
}

DetectionReport read_detection_report(std::istream& is) {
  using nlohmann::json;
  DetectionReport r;
  try {
    const json j = json::parse(is);
    for (const json& je : j.at("events")) {
      ContactEvent e;
      const std::string kind = je.at("kind").get<std::string>();
      if (kind == to_string(ContactKind::proximal)) e.kind = ContactKind::proximal;
      else if (kind == to_string(ContactKind::distal)) e.kind = ContactKind::distal;
      else throw ParameterError("unknown contact kind '" + kind + "'");
      e.sample = je.at("sample").get<std::size_t>();
      e.crossing = je.at("crossing_sample").get<std::size_t>();
      e.decided = je.at("decided_sample").get<std::size_t>();
      e.x_c = je.at("x_c_mm").get<double>();
      e.theta1 = deg2rad(je.at("theta1_deg").get<double>());
      e.theta2 = deg2rad(je.at("theta2_deg").get<double>());
      if (je.contains("confirm_slope_N_per_mm"))
        e.confirm_slope = je["confirm_slope_N_per_mm"].get<double>();
      r.events.push_back(e);
    }
    if (j.contains("local_slopes_N_per_mm")) {
      SlopeMetrics m;
      m.local_slopes = j["local_slopes_N_per_mm"].get<std::vector<double>>();
      const json& g = j.at("global_slope_N_per_mm");
      m.undefined = g.is_null();
      if (!m.undefined) m.global_slope = g.get<double>();
      r.slopes = m;
    }
    const json& c = j.at("classification");
    if (!c.is_null()) {
      const std::string name = c.get<std::string>();
      bool found = false;
      for (StiffnessClass k : {StiffnessClass::rigid, StiffnessClass::soft, StiffnessClass::instability_halt})
        if (name == to_string(k)) {
          r.stiffness = k;
          found = true;
        }
      if (!found) throw ParameterError("unknown classification '" + name + "'");
    }
  } catch (const json::exception& e) {
    throw ParameterError(std::string("detection report: ") + e.what());
  }
  return r;
}

}  // namespace psf
