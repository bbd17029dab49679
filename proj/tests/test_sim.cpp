#include "psf/proprioception.hpp"
#include "psf/scenario.hpp"
#include "psf/sim.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace psf;

namespace {

struct Fixture {
  FingerParams p;
  SeaParams s;
  SolveConfig cfg = SolveConfig::for_sea(s);
  HandModel hand = single_finger_hand(p);
  Trajectory ref = reference_profile(p, s, hand.orientation, cfg);
};

const Fixture& fx() {
  static const Fixture f;
  return f;
}

SampledSignal run(const ObjectModel& o) {
  const Fixture& f = fx();
  return simulate_grasp(f.hand, o, {{0, 60.0}}, Strategy::nominal, f.cfg).signals[0];
}

// Slope between the true distal contact and `span` samples later.
double loading_slope(const SampledSignal& sg, std::size_t span) {
  const std::size_t d = *sg.truth.distal_contact;
  const std::size_t e = std::min(sg.size() - 1, d + span);
  return (sg.tension[e] - sg.tension[d]) / (sg.x[e] - sg.x[d]);
}

}  // namespace

TEST(Object, SectionRadius) {
  ObjectModel o;
  EXPECT_DOUBLE_EQ(o.section_radius(40.0), 25.0);
  o.shape = ObjectShape::cone;
  o.taper = -0.2;
  EXPECT_DOUBLE_EQ(o.section_radius(10.0), 23.0);
  o.shape = ObjectShape::sphere;
  o.z_center = 5.0;
  EXPECT_DOUBLE_EQ(o.section_radius(20.0), 20.0);
  EXPECT_DOUBLE_EQ(o.section_radius(40.0), 0.0);
}

TEST(Object, Validation) {
  ObjectModel o;
  o.radius = -1.0;
  EXPECT_THROW(o.validate(), ParameterError);
  o.radius = 10.0;
  o.stiffness = Stiffness::soft;
  EXPECT_THROW(o.validate(), ParameterError);
}

TEST(Mount, RoundTrip) {
  const FingerMount m{{3.0, -4.0}, 0.7, true, 0.0};
  const Vec2 w{12.0, 5.0};
  EXPECT_LT((m.to_world(m.to_finger(w)) - w).norm(), 1e-12);
}

TEST(Simulator, PenetrationAtRestRejected) {
  ObjectModel o;
  o.center = {20.0, 0.0};
  EXPECT_THROW(HandSimulator(fx().hand, o, fx().cfg), ParameterError);
}

TEST(Simulator, FreeFlexionMatchesReference) {
  const SampledSignal sg = simulate_grasp(fx().hand, std::nullopt, {{0, 20.0}},
                                          Strategy::nominal, fx().cfg)
                               .signals[0];
  ASSERT_GT(sg.size(), 100u);
  for (std::size_t k = 0; k < sg.size(); k += 50)
    EXPECT_NEAR(sg.tension[k], fx().ref.at(sg.x[k]).tension, 1e-6);
  EXPECT_FALSE(sg.truth.proximal_contact || sg.truth.distal_contact);
}

TEST(Simulator, RigidDistalSlopeIsSeaStiffness) {
  const SampledSignal sg = run(distal_placement(fx().ref, fx().p, 0.6));
  ASSERT_TRUE(sg.truth.distal_contact);
  EXPECT_FALSE(sg.truth.proximal_contact);
  EXPECT_NEAR(loading_slope(sg, 150), fx().s.k_sea, 0.01 * fx().s.k_sea);
}

TEST(Simulator, AdaptiveGraspOrdersContacts) {
  const SampledSignal sg = run(adaptive_placement(fx().ref, fx().p, 10.0));
  ASSERT_TRUE(sg.truth.proximal_contact);
  ASSERT_TRUE(sg.truth.distal_contact);
  EXPECT_LT(*sg.truth.proximal_contact, *sg.truth.distal_contact);
  // MCP held after proximal contact.
  const std::size_t a = *sg.truth.proximal_contact + 1;
  EXPECT_NEAR(sg.truth.theta1[a], sg.truth.theta1[*sg.truth.distal_contact], 1e-9);
}

TEST(Simulator, SoftSweepSlopesIncreaseBelowSea) {
  double last = 0.0;
  for (double k : {0.2, 0.5, 1.0}) {
    ObjectModel o = distal_placement(fx().ref, fx().p, 0.6);
    o.stiffness = Stiffness::soft;
    o.k_obj = k;
    const SampledSignal sg = run(o);
    ASSERT_TRUE(sg.truth.distal_contact) << k;
    const double slope = loading_slope(sg, 100);
    EXPECT_GT(slope, last) << k;
    EXPECT_LT(slope, fx().s.k_sea) << k;
    last = slope;
  }
}

TEST(Simulator, SoftContactSticks) {
  ObjectModel o = distal_placement(fx().ref, fx().p, 0.6);
  o.stiffness = Stiffness::soft;
  o.k_obj = 0.2;
  const SampledSignal sg = run(o);
  // Tension never drops while the finger keeps pressing in.
  const std::size_t d = *sg.truth.distal_contact;
  for (std::size_t k = d + 1; k < sg.size(); ++k)
    if (sg.x[k] > sg.x[k - 1]) EXPECT_GE(sg.tension[k], sg.tension[k - 1] - 1e-9) << k;
}

TEST(Simulator, ContactPauseKeepsObjectStill) {
  const PinchScenario sc = opposed_pinch(fx().ref, fx().p);
  const std::vector<ExcursionSchedule> plan{{0, 20.0}, {300, 20.0}};
  auto max_shift = [](const GraspSimResult& r) {
    double m = 0.0;
    for (double v : r.object_trace) m = std::max(m, std::abs(v));
    return m;
  };
  const GraspSimResult nominal =
      simulate_grasp(sc.hand, sc.object, plan, Strategy::nominal, fx().cfg);
  const GraspSimResult paused =
      simulate_grasp(sc.hand, sc.object, plan, Strategy::contact_pause, fx().cfg);
  EXPECT_GT(max_shift(nominal), 1.0);
  EXPECT_LE(max_shift(paused), 0.1);
}

TEST(Simulator, Deterministic) {
  const ObjectModel o = adaptive_placement(fx().ref, fx().p, 5.0);
  const SampledSignal a = run(o);
  const SampledSignal b = run(o);
  EXPECT_EQ(a.tension, b.tension);
  EXPECT_EQ(a.x, b.x);
}

TEST(Disturbance, SignsAndClamping) {
  const Fixture& f = fx();
  const HoldContext ctx = preloaded_hold(f.p, f.s, f.hand.orientation, f.cfg, 2.5);
  ASSERT_GE(ctx.hold.tension, 2.5);
  auto mean_mid = [](const SampledSignal& sg) {
    double acc = 0.0;
    for (std::size_t k = 200; k < 250; ++k) acc += sg.tension[k];
    return acc / 50.0;
  };
  DisturbanceEvent ev{0.1, 0.4, DisturbanceKind::forced_extension, 0.1, 1};
  EXPECT_GT(mean_mid(inject_disturbance(ctx, ev)), ctx.hold.tension + 0.3);
  ev.kind = DisturbanceKind::forced_flexion;
  EXPECT_LT(mean_mid(inject_disturbance(ctx, ev)), ctx.hold.tension - 0.3);
  ev.magnitude = 0.0;
  const SampledSignal still = inject_disturbance(ctx, ev);
  for (double t : still.tension) EXPECT_NEAR(t, ctx.hold.tension, 1e-9);
  ev = {0.1, 0.4, DisturbanceKind::forced_extension, 5.0, 1};
  EXPECT_FALSE(inject_disturbance(ctx, ev).truth.notes.empty());
  EXPECT_THROW(inject_disturbance(ctx, {0.3, 0.1, DisturbanceKind::forced_flexion, 0.1, 1}),
               ParameterError);
}

TEST(Noise, SeededAndZeroMean) {
  const SampledSignal sg = run(distal_placement(fx().ref, fx().p, 0.3));
  const SampledSignal a = synthesize_noise(sg, 0.2, 7);
  const SampledSignal b = synthesize_noise(sg, 0.2, 7);
  const SampledSignal c = synthesize_noise(sg, 0.2, 8);
  EXPECT_EQ(a.tension, b.tension);
  EXPECT_NE(a.tension, c.tension);
  double mean = 0.0, var = 0.0;
  for (std::size_t k = 0; k < sg.size(); ++k) {
    const double d = a.tension[k] - sg.tension[k];
    mean += d;
    var += d * d;
  }
  mean /= static_cast<double>(sg.size());
  var /= static_cast<double>(sg.size());
  EXPECT_LT(std::abs(mean), 0.03);
  EXPECT_NEAR(std::sqrt(var), 0.2, 0.03);
}

TEST(Disturbance, SupportLossDropsTowardFree) {
  const Fixture& f = fx();
  const HoldContext ctx = braced_hold(f.p, f.s, f.hand.orientation, f.cfg, 2.5, 2.0);
  ASSERT_TRUE(ctx.contacts.mcp_limit);
  const SampledSignal sg =
      inject_disturbance(ctx, {0.1, 0.4, DisturbanceKind::support_loss, 0.0, 1});
  const double free_tension = f.ref.at(ctx.hold.x).tension;
  EXPECT_NEAR(sg.tension.back(), free_tension, 1e-3);
  EXPECT_LT(sg.tension.back(), ctx.hold.tension - 0.3);
  EXPECT_NEAR(sg.tension.front(), ctx.hold.tension, 1e-9);
}

TEST(Actuation, LateAndEarlyPip) {
  const Fixture& f = fx();
  const ActuationSummary late = summarize_actuation(f.ref);
  EXPECT_EQ(late.order, "mcp-then-pip");
  EXPECT_FALSE(late.near_simultaneous);
  EXPECT_LT(*late.mcp_onset_x, *late.pip_onset_x);

  FingerParams early = f.p;
  early.theta_pre1 = deg2rad(28.0);
  early.theta_pre2 = deg2rad(12.0);
  const ActuationSummary e =
      summarize_actuation(reference_profile(early, f.s, f.hand.orientation, f.cfg));
  EXPECT_EQ(e.order, "mcp-then-pip");
  EXPECT_TRUE(e.near_simultaneous);
  EXPECT_LT(*e.mcp_at_pip_onset, *late.mcp_at_pip_onset);

  EXPECT_EQ(summarize_actuation(Trajectory{}).order, "none");
}
