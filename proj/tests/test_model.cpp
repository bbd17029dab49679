#include "psf/model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace psf;

namespace {

SeaParams legacy_sea() {
  SeaParams s;
  s.k_sea = 1.225;
  s.x_sb_max = 20.0;
  return s;
}

}  // namespace

TEST(TendonLength, RestIsZero) { EXPECT_DOUBLE_EQ(tendon_length(0.0, 0.0, FingerParams{}), 0.0); }

TEST(TendonLength, LinearForm) {
  FingerParams p;
  EXPECT_NEAR(tendon_length(0.5, 0.25, p), 5.5, 1e-12);
  EXPECT_NEAR(tendon_length(p.rom1, p.rom2, p), 21.991148575128552, 1e-9);
}

TEST(TendonLength, OutsideRangeThrows) {
  FingerParams p;
  EXPECT_THROW(tendon_length(-0.01, 0.0, p), DomainError);
  EXPECT_THROW(tendon_length(0.0, p.rom2 + 0.01, p), DomainError);
}

TEST(SeaTension, Examples) {
  const SeaParams s = legacy_sea();
  EXPECT_DOUBLE_EQ(sea_tension(0.0, s), 0.0);
  EXPECT_NEAR(sea_tension(5.0, s), 12.25, 1e-12);
  EXPECT_NEAR(sea_tension(20.0, s), 49.0, 1e-12);
  EXPECT_THROW(sea_tension(-0.1, s), RangeError);
  EXPECT_THROW(sea_tension(20.1, s), RangeError);
}

TEST(SeaParamsDefaults, CeilingAttainedAtTravelLimit) {
  SeaParams s;
  EXPECT_NO_THROW(s.validate());
  EXPECT_NEAR(sea_tension(s.x_sb_max, s), 49.0, 1e-12);
}

TEST(ElasticEnergy, SeaTermVanishesAtZeroStretch) {
  FingerParams p;
  SeaParams s;
  const double t1 = 0.3, t2 = 0.2;
  const double x = tendon_length(t1, t2, p);
  const double q1 = p.theta_pre1 + t1, q2 = p.theta_pre2 + t2;
  EXPECT_NEAR(elastic_energy(t1, t2, x, p, s), p.k1 * q1 * q1 + p.k2 * q2 * q2, 1e-12);
}

TEST(ElasticEnergy, ScalarExample) {
  FingerParams p;
  p.k1 = p.k2 = 50.0;
  p.theta_pre1 = 0.63;
  p.theta_pre2 = 0.56;
  // Independent evaluation: 2.45 + 19.845 + 15.68.
  EXPECT_NEAR(elastic_energy(0.0, 0.0, 2.0, p, legacy_sea()), 37.975, 1e-9);
}

TEST(ElasticEnergy, AllZero) {
  FingerParams p;
  p.theta_pre1 = p.theta_pre2 = 0.0;
  EXPECT_DOUBLE_EQ(elastic_energy(0.0, 0.0, 0.0, p, SeaParams{}), 0.0);
}

TEST(ElasticEnergy, TendonCannotPush) {
  FingerParams p;
  EXPECT_THROW(elastic_energy(0.5, 0.5, 1.0, p, SeaParams{}), RangeError);
}

TEST(GravitationalEnergy, SidewaysPalmIsZero) {
  FingerParams p;
  const HandOrientation side = HandOrientation::palm_sideways();
  for (double t1 : {0.0, 0.4, 1.2})
    for (double t2 : {0.0, 0.7, 1.5}) EXPECT_EQ(gravitational_energy(t1, t2, p, side), 0.0);
}

TEST(GravitationalEnergy, MasslessIsZero) {
  FingerParams p;
  p.m1 = p.m2 = 0.0;
  EXPECT_EQ(gravitational_energy(0.5, 0.5, p, HandOrientation::palm_down()), 0.0);
}

TEST(GravitationalEnergy, PalmDownExamples) {
  FingerParams p;
  p.lc1 = {20.0, 0.0};
  const HandOrientation down = HandOrientation::palm_down();
  // Horizontal finger: both centers of mass at zero height.
  EXPECT_NEAR(gravitational_energy(0.0, 0.0, p, down), 0.0, 1e-12);
  EXPECT_NEAR(gravitational_energy(0.3, 0.5, p, down), -2.467098624465415, 1e-12);
}

TEST(TotalEnergy, Composition) {
  FingerParams p;
  SeaParams s;
  EXPECT_DOUBLE_EQ(total_energy(0.2, 0.1, 5.0, p, s, HandOrientation::palm_sideways()),
                   elastic_energy(0.2, 0.1, 5.0, p, s));
  FingerParams massless = p;
  massless.m1 = massless.m2 = 0.0;
  EXPECT_DOUBLE_EQ(total_energy(0.2, 0.1, 5.0, massless, s, HandOrientation::palm_down()),
                   elastic_energy(0.2, 0.1, 5.0, massless, s));
  EXPECT_NEAR(elastic_energy(0.4, 0.3, 10.0, p, s), 135.3289311350593, 1e-9);
  EXPECT_NEAR(total_energy(0.4, 0.3, 10.0, p, s, HandOrientation::palm_down()), 132.33676675799168,
              1e-9);
}

TEST(Validation, RejectsBadParameters) {
  SeaParams s;
  s.x_sb_max = 1.0;
  EXPECT_THROW(s.validate(), ParameterError);
  FingerParams p;
  p.r1 = 0.0;
  EXPECT_THROW(p.validate(), ParameterError);
  HandOrientation o;
  o.g_dir = {0.0, 2.0, 0.0};
  EXPECT_THROW(o.validate(), ParameterError);
  EXPECT_NO_THROW(FingerParams{}.as_single_joint().validate());
}

TEST(MakeState, TensionFollowsSeaLaw) {
  FingerParams p;
  SeaParams s;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double t1 = u(rng) * p.rom1, t2 = u(rng) * p.rom2;
    const double x = tendon_length(t1, t2, p) + u(rng) * 2.0 * s.x_sb_max;
    const FingerState st = make_state(t1, t2, x, p, s);
    EXPECT_EQ(st.tension, sea_tension((x - tendon_length(t1, t2, p)) / 2.0, s));
  }
}

TEST(Property, LengthMonotone) {
  FingerParams p;
  for (double t = 0.0; t < p.rom1 - 0.01; t += 0.01) {
    EXPECT_GT(tendon_length(t + 0.01, 0.3, p), tendon_length(t, 0.3, p));
    EXPECT_GT(tendon_length(0.3, t + 0.01, p), tendon_length(0.3, t, p));
  }
}

TEST(Property, ElasticEnergyConvex) {
  FingerParams p;
  SeaParams s;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  const double h = 1e-4;
  for (int i = 0; i < 100; ++i) {
    const double t1 = u(rng) * p.rom1, t2 = u(rng) * p.rom2;
    const double x = tendon_length(t1, t2, p) + 1.0 + u(rng) * 10.0;
    auto e = [&](double a, double b) { return elastic_energy(a, b, x, p, s); };
    const double haa = (e(t1 + h, t2) - 2 * e(t1, t2) + e(t1 - h, t2)) / (h * h);
    const double hbb = (e(t1, t2 + h) - 2 * e(t1, t2) + e(t1, t2 - h)) / (h * h);
    const double hab =
        (e(t1 + h, t2 + h) - e(t1 + h, t2 - h) - e(t1 - h, t2 + h) + e(t1 - h, t2 - h)) / (4 * h * h);
    const double scale = std::abs(haa) + std::abs(hbb);
    EXPECT_GE(haa, -1e-6 * scale);
    EXPECT_GE(haa * hbb - hab * hab, -1e-6 * scale * scale);
  }
}

TEST(Property, SingleJointGradientIgnoresSecondJoint) {
  const FingerParams t = FingerParams{}.as_single_joint();
  const Vec2 g = total_energy_gradient(0.3, 0.0, 5.0, t, SeaParams{}, HandOrientation::palm_down());
  EXPECT_EQ(g.y(), 0.0);
}
