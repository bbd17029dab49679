#include "psf/config.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace psf;

TEST(Config, EmptyGivesDefaults) {
  const Config c = parse_config("");
  EXPECT_EQ(c.hand.size(), 5u);
  EXPECT_EQ(c.hand.fingers[0].name, "thumb");
  EXPECT_DOUBLE_EQ(c.hand.sea.k_sea, SeaParams{}.k_sea);
  EXPECT_DOUBLE_EQ(c.detector.s_rigid, 0.8 * c.hand.sea.k_sea);
  EXPECT_DOUBLE_EQ(c.solver.excursion_step, c.hand.sea.cable_speed / 1000.0);
}

TEST(Config, DegreesConvertedAndSeaPropagates) {
  const Config c = parse_config(R"(
[sea]
k_sea = 4
x_sb_max = 6.125

[hand]
preset = "single"
orientation = "palm-down"

[finger.finger]
theta_pre1 = 30
rom2 = 45.0
k1 = 10
lc1 = [20, 1.5]
)");
  ASSERT_EQ(c.hand.size(), 1u);
  const FingerParams& p = c.hand.fingers[0];
  EXPECT_NEAR(p.theta_pre1, deg2rad(30.0), 1e-15);
  EXPECT_NEAR(p.rom2, kPi / 4.0, 1e-15);
  EXPECT_DOUBLE_EQ(p.k1, 10.0);
  EXPECT_DOUBLE_EQ(p.lc1.y(), 1.5);
  EXPECT_DOUBLE_EQ(c.detector.s_rigid, 3.2);
  EXPECT_DOUBLE_EQ(c.hand.orientation.g_dir.y(), -1.0);
}

TEST(Config, NewFingerAppended) {
  const Config c = parse_config(R"(
[finger.extra]
single_joint = true
origin = [10, -5]
heading = 90
)");
  ASSERT_EQ(c.hand.size(), 6u);
  EXPECT_TRUE(c.hand.fingers[5].single_joint());
  EXPECT_NEAR(c.hand.mounts[5].heading, kPi / 2.0, 1e-15);
  EXPECT_DOUBLE_EQ(c.hand.mounts[5].origin.x(), 10.0);
}

TEST(Config, ControlAndDetector) {
  const Config c = parse_config(R"(
[detector]
window = 40
r_prox = 0.5
[control]
strategy = "contact-pause"
target_tension = 30
)");
  EXPECT_EQ(c.detector.window, 40u);
  EXPECT_DOUBLE_EQ(c.detector.r_prox, 0.5);
  EXPECT_EQ(c.control.strategy, Strategy::contact_pause);
  EXPECT_DOUBLE_EQ(c.control.target_tension, 30.0);
}

TEST(Config, ErrorsCarryLine) {
  auto line_of = [](const char* text) {
    try {
      parse_config(text, "t.toml");
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find("t.toml:"), std::string::npos);
      return e.line();
    }
    ADD_FAILURE() << "no error for: " << text;
    return std::size_t{0};
  };
  EXPECT_EQ(line_of("[sea]\nk_sea = 2\nk_sae = 3\n"), 3u);     // unknown key
  EXPECT_EQ(line_of("\n\n[sea]\nk_sea = \n"), 4u);             // syntax
  EXPECT_EQ(line_of("[sea]\nk_sea = \"stiff\"\n"), 2u);        // wrong type
  EXPECT_EQ(line_of("[sea]\nk_sea = 2\n[tendon]\nx = 1\n"), 3u);  // unknown section
  EXPECT_EQ(line_of("[sea]\nk_sea = -1\n"), 1u);               // invalid value: section line
  EXPECT_EQ(line_of("[control]\nstrategy = \"fast\"\n"), 1u);
}

TEST(Config, LoadFile) {
  const auto path = std::filesystem::temp_directory_path() / "psf_config_test.toml";
  {
    std::ofstream(path) << "[sea]\nk_sea = 6\nx_sb_max = 4.1\n";
  }
  EXPECT_DOUBLE_EQ(load_config(path).hand.sea.k_sea, 6.0);
  std::filesystem::remove(path);
  EXPECT_THROW(load_config(path), ConfigError);
}

TEST(Scenario, PresetsAndSchedules) {
  const Config base;
  const GraspScenario d = parse_scenario("hand = \"single\"\n[object]\npreset = \"distal\"\nstiffness = \"soft\"\nk_obj = 0.5\n", base);
  ASSERT_EQ(d.setup.hand.size(), 1u);
  ASSERT_TRUE(d.setup.object);
  EXPECT_EQ(d.setup.object->stiffness, Stiffness::soft);
  EXPECT_DOUBLE_EQ(d.setup.object->k_obj, 0.5);

  const GraspScenario p = parse_scenario(R"(
strategy = "contact-pause"
[object]
preset = "pinch"
[[schedule]]
finger = "b"
start = 0.3
x_end = 20
)", base);
  ASSERT_EQ(p.setup.hand.size(), 2u);
  EXPECT_EQ(p.setup.control.strategy, Strategy::contact_pause);
  ASSERT_EQ(p.setup.schedules.size(), 2u);
  EXPECT_EQ(p.setup.schedules[0].start_sample, 0u);
  EXPECT_EQ(p.setup.schedules[1].start_sample, 300u);
  EXPECT_DOUBLE_EQ(p.setup.schedules[1].x_end, 20.0);

  EXPECT_FALSE(parse_scenario("name = \"free\"\n", base).setup.object);
}

TEST(Scenario, ErrorsCarryLine) {
  const Config base;
  auto line_of = [&](const char* text) {
    try {
      parse_scenario(text, base);
    } catch (const ConfigError& e) {
      return e.line();
    }
    ADD_FAILURE() << "no error for: " << text;
    return std::size_t{0};
  };
  EXPECT_EQ(line_of("name = \"x\"\n[object]\npreset = \"catalog\"\nlabel = \"teapot\"\n"), 2u);
  EXPECT_EQ(line_of("[object]\nradus = 3\n"), 2u);
  EXPECT_EQ(line_of("[[schedule]]\nfinger = \"pinky\"\n"), 1u);
}

TEST(Scene, ParsesObjectsAndSweep) {
  const SceneFile f = parse_scene(R"(
length = 200
[sweep]
speed = 40
[[object]]
label = "cylinder-r20-rigid"
along = 50
side = "dorsal"
)");
  EXPECT_DOUBLE_EQ(f.scene.length, 200.0);
  EXPECT_DOUBLE_EQ(f.sweep.speed, 40.0);
  ASSERT_EQ(f.scene.objects.size(), 1u);
  EXPECT_EQ(f.scene.objects[0].side, SweepSide::dorsal);
  EXPECT_THROW(parse_scene("[[object]]\nlabel = \"cylinder-r20-rigid\"\nalong = 500\n"), ConfigError);
  EXPECT_THROW(parse_scene("[[object]]\nlabel = \"cylinder-r20-rigid\"\nside = \"left\"\n"), ConfigError);
}

TEST(ScenarioFiles, ShippedFilesLoad) {
  const std::filesystem::path dir = PSF_SCENARIO_DIR;
  const Config base = load_config(dir / "default.toml");
  load_config(dir / "early_pip.toml");
  for (const char* f : {"free.toml", "rigid_distal.toml", "rigid_adaptive.toml",
                        "soft_adaptive.toml", "pinch_pause.toml", "hand_cylinder.toml"})
    EXPECT_NO_THROW(load_scenario(dir / f, base)) << f;
  EXPECT_EQ(load_scene(dir / "scene.toml").scene.objects.size(), 2u);
}
