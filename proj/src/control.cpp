#include "psf/control.hpp"

#include "psf/scenario.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace psf {

const char* to_string(FingerPhase p) {
  switch (p) {
    case FingerPhase::idle: return "idle";
    case FingerPhase::reaching: return "reaching";
    case FingerPhase::paused: return "paused";
    case FingerPhase::loading: return "loading";
    case FingerPhase::halted_soft: return "halted-soft";
    case FingerPhase::halted_instability: return "halted-instability";
    case FingerPhase::holding: return "holding";
  }
  return "unknown";
}

bool legal_transition(FingerPhase from, FingerPhase to) {
  using P = FingerPhase;
  switch (from) {
    case P::idle: return to == P::reaching;
    case P::reaching: return to == P::paused || to == P::loading || to == P::holding;
    case P::paused: return to == P::loading;
    case P::loading:
      return to == P::halted_soft || to == P::halted_instability || to == P::holding;
    default: return false;
  }
}

bool terminal(FingerPhase p) {
  return p == FingerPhase::halted_soft || p == FingerPhase::halted_instability ||
         p == FingerPhase::holding;
}

void ControlConfig::validate(const SeaParams& s) const {
  if (!(target_tension > 0.0 && target_tension <= s.saturation_tension()))
    throw ParameterError("target tension must lie in (0, SEA saturation tension]");
  if (!(hold_deadband > 0.0)) throw ParameterError("hold deadband must be > 0");
}

ControllerState::ControllerState(std::size_t n)
    : phase(n, FingerPhase::idle),
      contacted(n, false),
      distal(n, false),
      hold_baseline(n, 0.0),
      hold_tension(n),
      disturbed(n, false) {}

bool ControllerState::finished() const {
  return fault || std::all_of(phase.begin(), phase.end(), terminal);
}

namespace {

constexpr std::size_t kHoldFilter = 24;

void move(ControllerState& st, std::size_t i, std::size_t sample, FingerPhase to,
          const std::string& why) {
  const FingerPhase from = st.phase[i];
  if (!legal_transition(from, to))
    throw std::logic_error(std::string("illegal phase transition ") + to_string(from) + " -> " +
                           to_string(to));
  st.phase[i] = to;
  st.log.push_back({sample, i, "transition", why, from, to});
}

std::optional<std::string> contradiction(const ControllerState& st, std::size_t i,
                                         const FingerObservation& o) {
  bool distal = st.distal[i];
  for (const ContactEvent& e : o.new_events) {
    if (st.phase[i] == FingerPhase::idle) return "event before the finger started";
    if (e.kind == ContactKind::distal && o.sample == 0) return "distal event before any sample";
    if (e.sample > o.sample || e.decided > o.sample) return "event ahead of the newest sample";
    if (e.kind == ContactKind::proximal && distal) return "proximal event after distal event";
    if (e.kind == ContactKind::distal && distal) return "second distal event";
    distal = distal || e.kind == ContactKind::distal;
  }
  return std::nullopt;
}

void monitor_hold(ControllerState& st, std::size_t i, const FingerObservation& o,
                  const ControlConfig& cfg) {
  std::vector<double>& h = st.hold_tension[i];
  if (h.empty()) st.hold_baseline[i] = o.tension;
  h.push_back(o.tension);
  if (st.disturbed[i] || h.size() < kHoldFilter) return;
  double acc = 0.0;
  for (std::size_t k = h.size() - kHoldFilter; k < h.size(); ++k) acc += h[k];
  const double dev = acc / static_cast<double>(kHoldFilter) - st.hold_baseline[i];
  if (std::abs(dev) <= cfg.hold_deadband) return;
  st.disturbed[i] = true;
  const DisturbanceClass c =
      dev > 0.0 ? DisturbanceClass::forced_extension : DisturbanceClass::flexion_or_support_loss;
  st.log.push_back({o.sample, i, "disturbance", to_string(c), std::nullopt, std::nullopt});
}

}  // namespace

std::vector<Command> step_controller(ControllerState& st,
                                     const std::vector<FingerObservation>& obs,
                                     const ControlConfig& cfg) {
  const std::size_t n = st.size();
  if (obs.size() != n) throw ParameterError("one observation per finger required");
  if (!st.fault) {
    for (std::size_t i = 0; i < n; ++i) {
      if (auto why = contradiction(st, i, obs[i])) {
        st.fault = *why;
        st.log.push_back({obs[i].sample, i, "fault", *why, std::nullopt, std::nullopt});
        break;
      }
    }
  }
  if (st.fault) return std::vector<Command>(n, Command::halt);

  for (std::size_t i = 0; i < n; ++i) {
    const FingerObservation& o = obs[i];
    for (const ContactEvent& e : o.new_events) {
      st.log.push_back({o.sample, i, "event", to_string(e.kind), std::nullopt, std::nullopt});
      if (e.kind == ContactKind::distal) st.distal[i] = true;
    }
    if (o.contact || !o.new_events.empty()) st.contacted[i] = true;
    if (st.phase[i] == FingerPhase::idle && o.started)
      move(st, i, o.sample, FingerPhase::reaching, "schedule start");
  }

  const bool pausing = cfg.strategy == Strategy::contact_pause;
  for (std::size_t i = 0; i < n; ++i) {
    const FingerObservation& o = obs[i];
    if (st.phase[i] != FingerPhase::reaching) continue;
    if (pausing && st.contacted[i]) {
      move(st, i, o.sample, FingerPhase::paused, "contact");
    } else if (!pausing && st.distal[i]) {
      move(st, i, o.sample, FingerPhase::loading, "distal contact");
    } else if (o.exhausted) {
      move(st, i, o.sample, FingerPhase::holding, "excursion exhausted without contact");
    } else if (o.tension >= cfg.target_tension) {
      move(st, i, o.sample, FingerPhase::holding, "target tension reached while reaching");
    }
  }

  if (pausing) {
    // Fingers that never touch but ran out of excursion do not hold the others back.
    const bool all = std::none_of(st.phase.begin(), st.phase.end(), [](FingerPhase p) {
      return p == FingerPhase::reaching || p == FingerPhase::idle;
    });
    if (all) {
      for (std::size_t i = 0; i < n; ++i)
        if (st.phase[i] == FingerPhase::paused)
          move(st, i, obs[i].sample, FingerPhase::loading, "all fingers in contact");
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    const FingerObservation& o = obs[i];
    if (st.phase[i] != FingerPhase::loading) continue;
    if (o.stiffness == StiffnessClass::instability_halt) {
      move(st, i, o.sample, FingerPhase::halted_instability, "local slope below s_instab");
    } else if (o.stiffness == StiffnessClass::soft) {
      move(st, i, o.sample, FingerPhase::halted_soft, "soft object");
    } else if (o.tension >= cfg.target_tension) {
      move(st, i, o.sample, FingerPhase::holding, "target tension");
    } else if (o.exhausted) {
      move(st, i, o.sample, FingerPhase::holding, "excursion exhausted");
    }
  }

  std::vector<Command> cmds(n, Command::halt);
  for (std::size_t i = 0; i < n; ++i) {
    switch (st.phase[i]) {
      case FingerPhase::reaching:
      case FingerPhase::loading: cmds[i] = Command::advance; break;
      case FingerPhase::idle:
      case FingerPhase::paused: cmds[i] = Command::pause; break;
      case FingerPhase::holding:
        monitor_hold(st, i, obs[i], cfg);
        cmds[i] = Command::halt;
        break;
      default: cmds[i] = Command::halt; break;
    }
  }
  return cmds;
}

bool GraspOutcome::any_distal() const {
  for (const auto& ev : events)
    for (const ContactEvent& e : ev)
      if (e.kind == ContactKind::distal) return true;
  return false;
}

namespace {

// Local-slope classification fed one sample at a time after distal
// contact; agrees with classify_stiffness on the same samples up to the
// first decisive window.
class OnlineClassifier {
 public:
  explicit OnlineClassifier(const DetectorConfig& cfg) : cfg_(cfg) {}

  void start(std::size_t from) { from_ = from; }
  bool started() const { return from_.has_value(); }

  std::optional<StiffnessClass> feed(const SampledSignal& sg, std::size_t upto) {
    if (!from_ || result_) return result_;
    for (std::size_t k = std::max(*from_, next_); k <= upto; ++k) {
      next_ = k + 1;
      if (!xs_.empty() && sg.x[k] <= xs_.back()) continue;
      xs_.push_back(sg.x[k]);
      fs_.push_back(sg.tension[k]);
      if (xs_.size() >= cfg_.window) {
        const auto s = least_squares_slope(xs_, fs_, xs_.size() - cfg_.window, xs_.size());
        if (s && *s > cfg_.s_rigid) result_ = StiffnessClass::rigid;
        else if (s && *s < cfg_.s_instab) result_ = StiffnessClass::instability_halt;
      }
      if (!result_ && xs_.size() >= cfg_.classify_span) result_ = StiffnessClass::soft;
      if (result_) break;
    }
    return result_;
  }

 private:
  DetectorConfig cfg_;
  std::optional<std::size_t> from_;
  std::size_t next_ = 0;
  std::vector<double> xs_, fs_;
  std::optional<StiffnessClass> result_;
};

}  // namespace

GraspOutcome run_grasp(const GraspSetup& setup) {
  const HandModel& hand = setup.hand;
  hand.validate();
  setup.detector.validate(hand.sea);
  setup.control.validate(hand.sea);
  if (setup.noise.sigma < 0.0) throw ParameterError("noise sigma must be >= 0");
  const std::size_t n = hand.size();

  std::vector<ExcursionSchedule> plan = setup.schedules;
  if (plan.empty())
    for (const FingerParams& p : hand.fingers) plan.push_back({0, free_flexion_limit(p, hand.sea)});
  if (plan.size() != n) throw ParameterError("one schedule per finger required");

  HandSimulator sim(hand, setup.object, setup.solver, setup.sim);
  GraspOutcome out;
  std::vector<ContactDetector> det;
  std::vector<OnlineClassifier> cls;
  std::vector<std::mt19937_64> rng;
  std::normal_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const FingerParams& p = hand.fingers[i];
    out.names.push_back(p.name);
    out.references.push_back(
        reference_profile(p, hand.sea, hand.finger_orientation(i), setup.solver));
    det.emplace_back(out.references.back(), p, hand.sea, setup.detector);
    cls.emplace_back(setup.detector);
    std::seed_seq seq{static_cast<std::uint32_t>(setup.noise.seed),
                      static_cast<std::uint32_t>(setup.noise.seed >> 32),
                      static_cast<std::uint32_t>(i)};
    rng.emplace_back(seq);
    SampledSignal m;
    m.rate = setup.sim.rate;
    out.measured.push_back(m);
  }
  out.events.resize(n);
  out.stiffness.resize(n);
  out.slopes.resize(n);

  ControllerState st(n);
  std::size_t settled = 0;
  while (true) {
    std::vector<FingerObservation> obs(n);
    for (std::size_t i = 0; i < n; ++i) {
      const SampledSignal& clean = sim.signal(i);
      SampledSignal& m = out.measured[i];
      for (std::size_t k = m.size(); k < clean.size(); ++k) {
        const double noise = setup.noise.sigma > 0.0 ? setup.noise.sigma * unit(rng[i]) : 0.0;
        m.append(clean.x[k], clean.tension[k] + noise, clean.truth.theta1[k],
                 clean.truth.theta2[k]);
      }
      const std::size_t k = m.size() - 1;
      FingerObservation& o = obs[i];
      o.sample = k;
      o.started = k >= plan[i].start_sample;
      while (det[i].seen() < m.size()) {
        if (auto e = det[i].push(m, det[i].seen())) {
          o.new_events.push_back(*e);
          out.events[i].push_back(*e);
          if (e->kind == ContactKind::distal) cls[i].start(e->sample);
        }
      }
      o.contact = det[i].crossed();
      o.stiffness = cls[i].feed(m, k);
      o.tension = m.tension[k];
      o.exhausted = sim.saturated(i) || sim.state(i).x >= plan[i].x_end - 1e-12;
    }
    const std::vector<Command> cmds = step_controller(st, obs, setup.control);
    if (st.finished() && settled++ >= setup.control.settle) {
      out.end_reason = st.fault ? "fault" : "all fingers stopped";
      break;
    }
    if (sim.ended()) {
      out.end_reason = sim.end_reason();
      break;
    }
    if (sim.samples() >= setup.sim.max_samples) {
      out.end_reason = "sample budget exhausted";
      break;
    }
    sim.step(cmds);
  }

  for (std::size_t i = 0; i < n; ++i) {
    out.measured[i].truth = sim.signal(i).truth;
    out.stiffness[i] = cls[i].feed(out.measured[i], out.measured[i].size() - 1);
    for (const ContactEvent& e : out.events[i])
      if (e.kind == ContactKind::distal) out.slopes[i] = slope_metrics(out.measured[i], e, setup.detector);
  }
  out.phases = st.phase;
  out.fault = st.fault;
  out.log = st.log;
  out.object_trace = sim.object_trace();
  return out;
}

PostureSnapshot posture_snapshot(const GraspOutcome& g, const HandModel& hand,
                                 const DetectorConfig& cfg) {
  PostureSnapshot s;
  for (std::size_t i = 0; i < g.phases.size(); ++i)
    if (!terminal(g.phases[i]))
      throw NotReadyError("finger '" + g.names[i] + "' is still " + to_string(g.phases[i]));
  for (std::size_t i = 0; i < g.phases.size(); ++i) {
    const SampledSignal& m = g.measured[i];
    std::optional<double> frozen;
    if (!g.events[i].empty() && g.events[i].front().kind == ContactKind::proximal)
      frozen = g.events[i].front().theta1;
    s.names.push_back(g.names[i]);
    s.angles.push_back(estimate_contact_angles(m, m.size() - 1, g.references[i], hand.fingers[i],
                                               hand.sea, cfg, ContactKind::distal, frozen));
    s.timestamp = std::max(s.timestamp, m.t.back());
  }
  return s;
}

PostureSnapshot posture_truth(const GraspOutcome& g) {
  PostureSnapshot s;
  for (std::size_t i = 0; i < g.measured.size(); ++i) {
    const SampledSignal& m = g.measured[i];
    s.names.push_back(g.names[i]);
    s.angles.push_back({m.truth.theta1.back(), m.truth.theta2.back()});
    s.timestamp = std::max(s.timestamp, m.t.back());
  }
  return s;
}

void write_control_log(std::ostream& os, const std::vector<ControlLogEntry>& log,
                       const std::vector<std::string>& names) {
  for (const ControlLogEntry& e : log) {
    nlohmann::json j{{"sample", e.sample}, {"finger", names.at(e.finger)}, {"what", e.what},
                     {"detail", e.detail}};
    if (e.from) j["from"] = to_string(*e.from);
    if (e.to) j["to"] = to_string(*e.to);
    os << j.dump() << '\n';
  }
}

void write_posture_csv(std::ostream& os, const PostureSnapshot& s) {
  os << "finger,theta1_deg,theta2_deg\n";
  os.precision(17);
  for (std::size_t i = 0; i < s.names.size(); ++i)
    os << s.names[i] << ',' << rad2deg(s.angles[i].x()) << ',' << rad2deg(s.angles[i].y())
       << '\n';
}

PostureSnapshot read_posture_csv(std::istream& is) {
  PostureSnapshot s;
  std::string line;
  if (!std::getline(is, line) || line != "finger,theta1_deg,theta2_deg")
    throw ParameterError("posture CSV: bad header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name, a, b;
    if (!std::getline(ls, name, ',') || !std::getline(ls, a, ',') || !std::getline(ls, b))
      throw ParameterError("posture CSV: malformed row '" + line + "'");
    s.names.push_back(name);
    s.angles.push_back({deg2rad(std::stod(a)), deg2rad(std::stod(b))});
  }
  return s;
}

}  // namespace psf
