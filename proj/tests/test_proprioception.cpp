#include "psf/proprioception.hpp"
#include "psf/scenario.hpp"
#include "psf/sim.hpp"

#include <gtest/gtest.h>

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

SampledSignal run(const ObjectModel& o, double x_end = 60.0) {
  return simulate_grasp(fx().hand, o, {{0, x_end}}, Strategy::nominal, fx().cfg).signals[0];
}

SampledSignal free_signal() {
  return simulate_grasp(fx().hand, std::nullopt, {{0, 20.0}}, Strategy::nominal, fx().cfg)
      .signals[0];
}

std::vector<ContactEvent> detect(const SampledSignal& sg) {
  const Fixture& f = fx();
  return detect_contacts(sg, f.ref, f.p, f.s, f.dc);
}

// Excursion the detector had reached when it committed to an event.
double decision_lag(const SampledSignal& sg, const ContactEvent& e, std::size_t truth) {
  return sg.x[e.decided] - sg.x[truth];
}

constexpr double kAllowance = 50 * 0.0289 + 2.17;

}  // namespace

TEST(DetectorConfig, Validation) {
  SeaParams s;
  DetectorConfig c = DetectorConfig::for_sea(s);
  EXPECT_NO_THROW(c.validate(s));
  EXPECT_DOUBLE_EQ(c.s_rigid, 0.8 * s.k_sea);
  EXPECT_EQ(c.delay_samples(), 75u);
  c.window = 1;
  EXPECT_THROW(c.validate(s), ParameterError);
  c = DetectorConfig::for_sea(s);
  c.s_instab = c.s_rigid + 1.0;
  EXPECT_THROW(c.validate(s), ParameterError);
  c = DetectorConfig::for_sea(s);
  c.s_rigid = s.k_sea * 1.5;
  EXPECT_THROW(c.validate(s), ParameterError);
}

TEST(Rmse, ZeroOnReferenceAndUnderOffset) {
  SampledSignal sg = free_signal();
  for (double bias : {0.0, 5.0}) {
    SampledSignal shifted = sg;
    for (double& t : shifted.tension) t += bias;
    const RmseSeries r = rmse_series(shifted, fx().ref, fx().dc);
    ASSERT_FALSE(r.value.empty());
    for (std::size_t i = 0; i < r.value.size(); ++i)
      if (r.valid[i]) EXPECT_LT(r.value[i], 1e-6) << i;
  }
}

TEST(Rmse, OutOfReferenceFlagged) {
  SampledSignal sg;
  for (int k = 0; k < 120; ++k) sg.append(60.0 + k * 0.01, 1.0, 0.0, 0.0);
  const RmseSeries r = rmse_series(sg, fx().ref, fx().dc);
  for (bool v : r.valid) EXPECT_FALSE(v);
}

TEST(Detect, FreeFlexionHasNoEvents) { EXPECT_TRUE(detect(free_signal()).empty()); }

TEST(Detect, DistalOnlyRigid) {
  for (double frac : {0.3, 0.6, 0.9}) {
    const SampledSignal sg = run(distal_placement(fx().ref, fx().p, frac));
    const auto ev = detect(sg);
    ASSERT_EQ(ev.size(), 1u) << frac;
    EXPECT_EQ(ev[0].kind, ContactKind::distal);
    const std::size_t truth = *sg.truth.distal_contact;
    EXPECT_GE(decision_lag(sg, ev[0], truth), 0.0);
    EXPECT_LE(decision_lag(sg, ev[0], truth), kAllowance);
    EXPECT_LE(std::abs(ev[0].x_c - sg.x[truth]), 25 * 0.0289 + 2.17);
    EXPECT_GE(*ev[0].confirm_slope, fx().dc.s_load);
  }
}

TEST(Detect, AdaptiveRigidOrderAndAngles) {
  for (double off : {5.0, 10.0, 15.0}) {
    const SampledSignal sg = run(adaptive_placement(fx().ref, fx().p, off));
    const auto ev = detect(sg);
    ASSERT_EQ(ev.size(), 2u) << off;
    EXPECT_EQ(ev[0].kind, ContactKind::proximal);
    EXPECT_EQ(ev[1].kind, ContactKind::distal);
    EXPECT_LT(*ev[0].confirm_slope, fx().dc.s_load);
    const std::size_t tp = *sg.truth.proximal_contact, td = *sg.truth.distal_contact;
    EXPECT_GE(decision_lag(sg, ev[0], tp), 0.0);
    EXPECT_LE(decision_lag(sg, ev[0], tp), kAllowance);
    EXPECT_GE(decision_lag(sg, ev[1], td), 0.0);
    EXPECT_LE(decision_lag(sg, ev[1], td), kAllowance);
    // theta1 stays frozen from the proximal event.
    EXPECT_DOUBLE_EQ(ev[0].theta1, ev[1].theta1);
    EXPECT_LE(rad2deg(std::abs(ev[1].theta1 - sg.truth.theta1[td])), 3.0);
    EXPECT_LE(rad2deg(std::abs(ev[1].theta2 - sg.truth.theta2[td])), 3.0);
  }
}

TEST(Detect, NoiseRobust) {
  const SampledSignal clean = run(adaptive_placement(fx().ref, fx().p, 10.0));
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto ev = detect(synthesize_noise(clean, 0.2, seed));
    ASSERT_EQ(ev.size(), 2u) << seed;
    EXPECT_EQ(ev[0].kind, ContactKind::proximal);
    EXPECT_EQ(ev[1].kind, ContactKind::distal);
  }
}

TEST(Detect, PausedSamplesIgnored) {
  const SampledSignal sg = run(distal_placement(fx().ref, fx().p, 0.6));
  SampledSignal stretched;
  stretched.rate = sg.rate;
  for (std::size_t k = 0; k < sg.size(); ++k) {
    const int copies = k == 100 ? 40 : 1;
    for (int c = 0; c < copies; ++c)
      stretched.append(sg.x[k], sg.tension[k], sg.truth.theta1[k], sg.truth.theta2[k]);
  }
  const auto a = detect(sg);
  const auto b = detect(stretched);
  ASSERT_EQ(a.size(), b.size());
  EXPECT_DOUBLE_EQ(a[0].x_c, b[0].x_c);
}

TEST(Detect, StreamingMatchesOffline) {
  const SampledSignal sg = run(adaptive_placement(fx().ref, fx().p, 5.0));
  ContactDetector det(fx().ref, fx().p, fx().s, fx().dc);
  std::size_t emitted = 0;
  for (std::size_t k = 0; k < sg.size(); ++k)
    if (det.push(sg, k)) ++emitted;
  EXPECT_EQ(emitted, 2u);
  EXPECT_TRUE(det.distal_found());
  EXPECT_EQ(det.events().size(), detect(sg).size());
  EXPECT_THROW(det.push(sg, 0), ParameterError);
}

TEST(Angles, Interpolation) {
  const Vec2 z = estimate_joint_angles(0.0, fx().ref);
  EXPECT_DOUBLE_EQ(z.x(), 0.0);
  EXPECT_DOUBLE_EQ(z.y(), 0.0);
  const FingerState& mid = fx().ref.states[fx().ref.size() / 2];
  const Vec2 m = estimate_joint_angles(mid.x, fx().ref);
  EXPECT_DOUBLE_EQ(m.x(), mid.theta1);
  EXPECT_DOUBLE_EQ(m.y(), mid.theta2);
  EXPECT_THROW(estimate_joint_angles(-1.0, fx().ref), RangeError);
  EXPECT_THROW(estimate_joint_angles(1e3, fx().ref), RangeError);
}

TEST(Angles, FrozenMcpWithinRange) {
  const FingerParams& p = fx().p;
  const Vec2 a = estimate_joint_angles(fx().ref.x_max(), fx().ref, 0.2, p);
  EXPECT_DOUBLE_EQ(a.x(), 0.2);
  EXPECT_LE(a.y(), p.max_angle(2));
  EXPECT_GE(a.y(), p.min_angle(2));
}

TEST(Slopes, RigidMatchesSea) {
  const SampledSignal sg = run(distal_placement(fx().ref, fx().p, 0.6));
  const auto ev = detect(sg);
  const SlopeMetrics m = slope_metrics(sg, ev.at(0), fx().dc);
  ASSERT_FALSE(m.undefined);
  EXPECT_NEAR(m.global_slope, fx().s.k_sea, 0.01 * fx().s.k_sea);
  // Early windows may still hold a few pre-contact samples.
  ASSERT_FALSE(m.local_slopes.empty());
  EXPECT_NEAR(m.local_slopes.back(), fx().s.k_sea, 0.01 * fx().s.k_sea);
  for (double s : m.local_slopes) EXPECT_LE(s, 1.01 * fx().s.k_sea);
  EXPECT_EQ(classify_stiffness(m, fx().dc), StiffnessClass::rigid);
}

TEST(Slopes, SoftBetweenZeroAndSea) {
  ObjectModel o = distal_placement(fx().ref, fx().p, 0.6);
  o.stiffness = Stiffness::soft;
  o.k_obj = 0.5;
  SampledSignal sg = run(o);
  const auto ev = detect(sg);
  ASSERT_FALSE(ev.empty());
  // Loading up to the classification span.
  const std::size_t end = ev.back().sample + fx().dc.classify_span;
  sg.t.resize(end);
  sg.x.resize(end);
  sg.tension.resize(end);
  const SlopeMetrics m = slope_metrics(sg, ev.back(), fx().dc);
  EXPECT_GT(m.global_slope, 0.0);
  EXPECT_LT(m.global_slope, fx().s.k_sea);
  EXPECT_EQ(classify_stiffness(m, fx().dc), StiffnessClass::soft);
}

TEST(Slopes, ConstantSegmentAndNoProgress) {
  const std::vector<double> x{0.0, 1.0, 2.0, 3.0}, f{4.0, 4.0, 4.0, 4.0};
  EXPECT_DOUBLE_EQ(*least_squares_slope(x, f, 0, 4), 0.0);
  EXPECT_FALSE(least_squares_slope(x, f, 0, 1));
  SampledSignal sg;
  for (int k = 0; k < 10; ++k) sg.append(5.0, 3.0, 0.0, 0.0);
  ContactEvent e;
  e.kind = ContactKind::distal;
  EXPECT_TRUE(slope_metrics(sg, e, fx().dc).undefined);
}

TEST(Classify, ThresholdLogic) {
  const DetectorConfig& c = fx().dc;
  const double k = fx().s.k_sea;
  SlopeMetrics m;
  m.local_slopes.assign(10, k);
  EXPECT_EQ(classify_stiffness(m, c), StiffnessClass::rigid);
  m.local_slopes.assign(10, 0.3 * k);
  EXPECT_EQ(classify_stiffness(m, c), StiffnessClass::soft);
  m.local_slopes[4] = 0.9 * k;
  EXPECT_EQ(classify_stiffness(m, c), StiffnessClass::rigid);
  m.local_slopes.assign(10, 0.3 * k);
  m.local_slopes[6] = 0.01;
  EXPECT_EQ(classify_stiffness(m, c), StiffnessClass::instability_halt);
}

TEST(DisturbanceDetect, Signs) {
  std::vector<double> up(300, 2.5), down(300, 2.5);
  for (std::size_t k = 100; k < 300; ++k) {
    up[k] = 3.5;
    down[k] = 1.5;
  }
  const auto u = detect_disturbance(up, 2.5, 0.3);
  EXPECT_EQ(u.kind, DisturbanceClass::forced_extension);
  EXPECT_GT(*u.sample, 100u);
  EXPECT_EQ(detect_disturbance(down, 2.5, 0.3).kind, DisturbanceClass::flexion_or_support_loss);
  EXPECT_EQ(detect_disturbance(std::vector<double>(300, 2.6), 2.5, 0.3).kind,
            DisturbanceClass::none);
}

TEST(DisturbanceDetect, InjectedEvents) {
  const Fixture& f = fx();
  const HoldContext ctx = braced_hold(f.p, f.s, f.hand.orientation, f.cfg, 2.5, 2.0);
  const std::pair<DisturbanceKind, DisturbanceClass> cases[] = {
      {DisturbanceKind::forced_extension, DisturbanceClass::forced_extension},
      {DisturbanceKind::forced_flexion, DisturbanceClass::flexion_or_support_loss},
      {DisturbanceKind::support_loss, DisturbanceClass::flexion_or_support_loss}};
  for (const auto& [kind, expect] : cases) {
    const SampledSignal sg = inject_disturbance(ctx, {0.1, 0.4, kind, 0.1, 1});
    EXPECT_EQ(detect_disturbance(synthesize_noise(sg, 0.05, 3).tension, ctx.hold.tension, 0.3).kind,
              expect)
        << to_string(kind);
  }
}

TEST(Report, Json) {
  const SampledSignal sg = run(adaptive_placement(fx().ref, fx().p, 5.0));
  const auto ev = detect(sg);
  std::ostringstream os;
  write_detection_report(os, ev, slope_metrics(sg, ev.back(), fx().dc), StiffnessClass::rigid);
  const std::string s = os.str();
  EXPECT_NE(s.find("\"proximal\""), std::string::npos);
  EXPECT_NE(s.find("\"rigid\""), std::string::npos);
}

TEST(Report, RoundTrip) {
  const SampledSignal sg = run(adaptive_placement(fx().ref, fx().p, 5.0));
  const auto ev = detect(sg);
  const SlopeMetrics m = slope_metrics(sg, ev.back(), fx().dc);
  std::stringstream ss;
  write_detection_report(ss, ev, m, StiffnessClass::rigid);
  const DetectionReport r = read_detection_report(ss);
  ASSERT_EQ(r.events.size(), ev.size());
  for (std::size_t i = 0; i < ev.size(); ++i) {
    EXPECT_EQ(r.events[i].kind, ev[i].kind);
    EXPECT_EQ(r.events[i].sample, ev[i].sample);
    EXPECT_EQ(r.events[i].decided, ev[i].decided);
    EXPECT_DOUBLE_EQ(r.events[i].x_c, ev[i].x_c);
    EXPECT_NEAR(r.events[i].theta1, ev[i].theta1, 1e-12);
  }
  ASSERT_TRUE(r.slopes);
  EXPECT_DOUBLE_EQ(r.slopes->global_slope, m.global_slope);
  EXPECT_EQ(r.stiffness, StiffnessClass::rigid);

  std::stringstream empty;
  write_detection_report(empty, {}, std::nullopt, std::nullopt);
  const DetectionReport e = read_detection_report(empty);
  EXPECT_TRUE(e.events.empty());
  EXPECT_FALSE(e.slopes);
  EXPECT_FALSE(e.stiffness);

  std::stringstream bad("{\"events\": 3}");
  EXPECT_THROW(read_detection_report(bad), ParameterError);
}

TEST(DisturbanceDetect, QuietHoldNeverTriggers) {
  std::vector<double> flat(600, 2.5);
  SampledSignal sg;
  sg.rate = 1000.0;
  for (double t : flat) sg.append(0.0, t, 0.0, 0.0);
  for (std::uint64_t seed = 0; seed < 200; ++seed)
    EXPECT_EQ(detect_disturbance(synthesize_noise(sg, 0.2, seed).tension, 2.5, 0.3).kind,
              DisturbanceClass::none)
        << seed;
}
