#include "psf/control.hpp"
#include "psf/scenario.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <cmath>
#include <sstream>

using namespace psf;

namespace {

struct Fixture {
  FingerParams p;
  SeaParams s;
  SolveConfig cfg = SolveConfig::for_sea(s);
  HandModel hand = single_finger_hand(p);
  Trajectory ref = reference_profile(p, s, hand.orientation, cfg);
  DetectorConfig dc = DetectorConfig::for_sea(s);
};

const Fixture& fx() {
  static const Fixture f;
  return f;
}

GraspSetup setup(std::optional<ObjectModel> o, double sigma = 0.0) {
  const Fixture& f = fx();
  GraspSetup g;
  g.hand = f.hand;
  g.object = std::move(o);
  g.solver = f.cfg;
  g.detector = f.dc;
  g.noise = {sigma, 11};
  return g;
}

std::vector<FingerObservation> quiet(std::size_t n, std::size_t sample) {
  std::vector<FingerObservation> obs(n);
  for (auto& o : obs) o.sample = sample;
  return obs;
}

ContactEvent distal_at(std::size_t k) {
  ContactEvent e;
  e.kind = ContactKind::distal;
  e.sample = k;
  e.decided = k;
  return e;
}

ObjectModel soft_distal(double k) {
  ObjectModel o = distal_placement(fx().ref, fx().p, 0.6);
  o.stiffness = Stiffness::soft;
  o.k_obj = k;
  return o;
}

}  // namespace

TEST(Phase, Transitions) {
  using P = FingerPhase;
  EXPECT_TRUE(legal_transition(P::idle, P::reaching));
  EXPECT_TRUE(legal_transition(P::reaching, P::paused));
  EXPECT_TRUE(legal_transition(P::paused, P::loading));
  EXPECT_TRUE(legal_transition(P::reaching, P::loading));
  EXPECT_TRUE(legal_transition(P::loading, P::halted_soft));
  EXPECT_FALSE(legal_transition(P::idle, P::loading));
  EXPECT_FALSE(legal_transition(P::paused, P::reaching));
  EXPECT_FALSE(legal_transition(P::holding, P::loading));
  EXPECT_FALSE(legal_transition(P::halted_soft, P::loading));
}

TEST(Controller, NoContactsAllAdvance) {
  ControllerState st(3);
  const auto cmds = step_controller(st, quiet(3, 0), {});
  for (Command c : cmds) EXPECT_EQ(c, Command::advance);
  for (FingerPhase p : st.phase) EXPECT_EQ(p, FingerPhase::reaching);
}

TEST(Controller, ContactPauseWaitsForLastFinger) {
  ControlConfig cfg;
  cfg.strategy = Strategy::contact_pause;
  ControllerState st(3);
  step_controller(st, quiet(3, 0), cfg);

  auto obs = quiet(3, 10);
  obs[0].contact = true;
  auto cmds = step_controller(st, obs, cfg);
  EXPECT_EQ(cmds[0], Command::pause);
  EXPECT_EQ(cmds[1], Command::advance);
  EXPECT_EQ(cmds[2], Command::advance);

  obs = quiet(3, 20);
  obs[0].contact = obs[1].contact = true;
  cmds = step_controller(st, obs, cfg);
  EXPECT_EQ(cmds[1], Command::pause);
  EXPECT_EQ(cmds[2], Command::advance);

  for (auto& o : obs) o.contact = true;
  cmds = step_controller(st, obs, cfg);
  for (Command c : cmds) EXPECT_EQ(c, Command::advance);
  for (FingerPhase p : st.phase) EXPECT_EQ(p, FingerPhase::loading);
}

TEST(Controller, SoftHaltsOnlyThatFinger) {
  ControllerState st(2);
  step_controller(st, quiet(2, 0), {});
  auto obs = quiet(2, 100);
  obs[0].new_events = {distal_at(90)};
  obs[1].new_events = {distal_at(95)};
  step_controller(st, obs, {});
  obs = quiet(2, 200);
  obs[1].stiffness = StiffnessClass::soft;
  obs[0].stiffness = StiffnessClass::rigid;
  const auto cmds = step_controller(st, obs, {});
  EXPECT_EQ(st.phase[0], FingerPhase::loading);
  EXPECT_EQ(st.phase[1], FingerPhase::halted_soft);
  EXPECT_EQ(cmds[0], Command::advance);
  EXPECT_EQ(cmds[1], Command::halt);

  obs = quiet(2, 300);
  obs[0].tension = 40.0;
  step_controller(st, obs, {});
  EXPECT_EQ(st.phase[0], FingerPhase::holding);
  EXPECT_TRUE(st.finished());
}

TEST(Controller, InstabilityHaltsImmediately) {
  ControllerState st(1);
  step_controller(st, quiet(1, 0), {});
  auto obs = quiet(1, 50);
  obs[0].new_events = {distal_at(40)};
  obs[0].stiffness = StiffnessClass::instability_halt;
  EXPECT_EQ(step_controller(st, obs, {})[0], Command::halt);
  EXPECT_EQ(st.phase[0], FingerPhase::halted_instability);
}

TEST(Controller, ContradictionFaultsAllHalt) {
  ControllerState st(2);
  auto obs = quiet(2, 0);
  step_controller(st, obs, {});
  obs[1].new_events = {distal_at(0)};
  const auto cmds = step_controller(st, obs, {});
  ASSERT_TRUE(st.fault);
  for (Command c : cmds) EXPECT_EQ(c, Command::halt);
  EXPECT_TRUE(st.finished());

  ControllerState late(1);
  step_controller(late, quiet(1, 0), {});
  auto o = quiet(1, 10);
  o[0].new_events = {distal_at(12)};
  step_controller(late, o, {});
  EXPECT_TRUE(late.fault);
}

TEST(Controller, Deterministic) {
  ControllerState a(2), b(2);
  auto obs = quiet(2, 5);
  obs[0].contact = true;
  ControlConfig cfg;
  cfg.strategy = Strategy::contact_pause;
  EXPECT_EQ(step_controller(a, obs, cfg), step_controller(b, obs, cfg));
  EXPECT_EQ(a.phase, b.phase);
}

TEST(RunGrasp, FreeFlexionPostureIsReferenceEnd) {
  GraspSetup g = setup(std::nullopt);
  g.schedules = {{0, 20.0}};
  const GraspOutcome r = run_grasp(g);
  EXPECT_EQ(r.phases[0], FingerPhase::holding);
  EXPECT_TRUE(r.events[0].empty());
  const PostureSnapshot s = posture_snapshot(r, g.hand, g.detector);
  const FingerState end = fx().ref.at(r.measured[0].x.back());
  EXPECT_NEAR(s.angles[0].x(), end.theta1, 1e-4);
  EXPECT_NEAR(s.angles[0].y(), end.theta2, 1e-4);
}

TEST(RunGrasp, RigidLoadsToTargetAndHolds) {
  for (const ObjectModel& o :
       {distal_placement(fx().ref, fx().p, 0.6), adaptive_placement(fx().ref, fx().p, 10.0)}) {
    const GraspSetup g = setup(o, 0.2);
    const GraspOutcome r = run_grasp(g);
    EXPECT_FALSE(r.fault);
    EXPECT_EQ(r.phases[0], FingerPhase::holding);
    EXPECT_EQ(r.stiffness[0], StiffnessClass::rigid);
    EXPECT_GE(r.measured[0].truth.theta1.size(), 1u);
    const PostureSnapshot est = posture_snapshot(r, g.hand, g.detector);
    const PostureSnapshot tru = posture_truth(r);
    EXPECT_LE(rad2deg(std::abs(est.angles[0].x() - tru.angles[0].x())), 3.0);
    EXPECT_LE(rad2deg(std::abs(est.angles[0].y() - tru.angles[0].y())), 3.0);
  }
}

TEST(RunGrasp, SoftHaltBoundedAndBiased) {
  const Fixture& f = fx();
  for (double k : {0.2, 0.5, 1.0}) {
    const GraspSetup g = setup(soft_distal(k));
    const GraspOutcome r = run_grasp(g);
    ASSERT_EQ(r.phases[0], FingerPhase::halted_soft) << k;
    // Peak tension is bounded by the tension at classification plus one
    // window of loading at SEA stiffness.
    std::size_t halt = 0;
    for (const ControlLogEntry& e : r.log)
      if (e.to == FingerPhase::halted_soft) halt = e.sample;
    const SampledSignal& m = r.measured[0];
    double peak = 0.0;
    for (std::size_t i = halt; i < m.size(); ++i) peak = std::max(peak, m.tension[i]);
    EXPECT_LE(peak, m.tension[halt] + f.dc.window * f.cfg.excursion_step * f.s.k_sea) << k;
    // Estimates treat the soft contact as if the finger were still free.
    const PostureSnapshot est = posture_snapshot(r, g.hand, g.detector);
    const PostureSnapshot tru = posture_truth(r);
    EXPECT_GT(est.angles[0].x(), tru.angles[0].x()) << k;
    EXPECT_LT(est.angles[0].y(), tru.angles[0].y()) << k;
  }
}

TEST(RunGrasp, ContactPauseFreezesEarlyFinger) {
  const PinchScenario sc = opposed_pinch(fx().ref, fx().p);
  GraspSetup g = setup(sc.object);
  g.hand = sc.hand;
  g.control.strategy = Strategy::contact_pause;
  g.schedules = {{0, 20.0}, {300, 20.0}};
  const GraspOutcome r = run_grasp(g);
  ASSERT_FALSE(r.fault);
  std::vector<std::size_t> paused(2, 0);
  std::size_t released = 0;
  for (const ControlLogEntry& e : r.log) {
    if (e.to == FingerPhase::paused) paused[e.finger] = e.sample;
    if (e.to == FingerPhase::loading && e.from == FingerPhase::paused)
      released = std::max(released, e.sample);
  }
  ASSERT_GT(released, 0u);
  for (std::size_t i = 0; i < 2; ++i) {
    const SampledSignal& m = r.measured[i];
    EXPECT_DOUBLE_EQ(m.x[paused[i]], m.x[released]) << i;
  }
  double shift = 0.0;
  for (double v : r.object_trace) shift = std::max(shift, std::abs(v));
  EXPECT_LE(shift, 0.1);
}

TEST(RunGrasp, SeededRunsRepeat) {
  const GraspSetup g = setup(adaptive_placement(fx().ref, fx().p, 5.0), 0.2);
  const GraspOutcome a = run_grasp(g);
  const GraspOutcome b = run_grasp(g);
  EXPECT_EQ(a.measured[0].tension, b.measured[0].tension);
  std::ostringstream la, lb;
  write_control_log(la, a.log, a.names);
  write_control_log(lb, b.log, b.names);
  EXPECT_EQ(la.str(), lb.str());
}

TEST(Posture, NotReadyWhileReaching) {
  GraspOutcome g;
  g.names = {"index"};
  g.phases = {FingerPhase::reaching};
  EXPECT_THROW(posture_snapshot(g, fx().hand, fx().dc), NotReadyError);
}

TEST(Posture, CsvRoundTrip) {
  PostureSnapshot s;
  s.names = {"thumb", "index"};
  s.angles = {{0.3, 0.0}, {0.7, 0.25}};
  std::ostringstream os;
  write_posture_csv(os, s);
  std::istringstream is(os.str());
  const PostureSnapshot back = read_posture_csv(is);
  ASSERT_EQ(back.names, s.names);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_LT((back.angles[i] - s.angles[i]).norm(), 1e-12);
}

TEST(Log, JsonLines) {
  const GraspOutcome r = run_grasp(setup(distal_placement(fx().ref, fx().p, 0.6)));
  std::ostringstream os;
  write_control_log(os, r.log, r.names);
  std::istringstream is(os.str());
  std::string line;
  std::size_t transitions = 0;
  while (std::getline(is, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j["what"] == "transition") ++transitions;
  }
  EXPECT_EQ(transitions, 3u);  // idle→reaching→loading→holding
}
