#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "resdob/config.hpp"

using namespace resdob;

TEST(Config, ModesRoundTrip) {
  for (FilterMode m : all_filter_modes()) EXPECT_EQ(parse_filter_mode(to_string(m)), m);
  EXPECT_THROW(parse_filter_mode("dob"), std::invalid_argument);
  EXPECT_EQ(all_filter_modes().size(), 5u);
}

TEST(Config, ModeComposition) {
  EXPECT_FALSE(uses_cbf(FilterMode::kNone));
  EXPECT_TRUE(uses_cbf(FilterMode::kCbf));
  EXPECT_TRUE(uses_dob(FilterMode::kDobCbf) && !uses_residual(FilterMode::kDobCbf));
  EXPECT_TRUE(uses_residual(FilterMode::kResCbf) && !uses_dob(FilterMode::kResCbf));
  EXPECT_TRUE(uses_dob(FilterMode::kResDobCbf) && uses_residual(FilterMode::kResDobCbf));
}

TEST(Config, RobustnessFollowsMode) {
  RunConfig c;
  c.mode = FilterMode::kCbf;
  EXPECT_EQ(c.robustness(), Robustness::kNone);
  c.mode = FilterMode::kResDobCbf;
  EXPECT_EQ(c.robustness(), Robustness::kDobPlusBound);
  c.use_error_bound = false;
  EXPECT_EQ(c.robustness(), Robustness::kDob);
  c.dob_enabled = false;
  EXPECT_EQ(c.robustness(), Robustness::kNone);
}

TEST(Config, DefaultsValidate) {
  for (const char* t : {"goal1", "goal2", "arena"}) {
    EXPECT_NO_THROW(default_config(t, RobotKind::kPoint).validate()) << t;
    EXPECT_NO_THROW(default_config(t, RobotKind::kCar).validate()) << t;
  }
  EXPECT_THROW(default_config("maze", RobotKind::kPoint), std::invalid_argument);
  const RunConfig c = default_config("goal1", RobotKind::kPoint);
  EXPECT_EQ(c.ppo.hidden, (std::vector<int>{64, 64}));
  EXPECT_EQ(c.task.episode_length, 400);
  EXPECT_DOUBLE_EQ(c.ppo.target_cost, 5.0);
}

TEST(Config, WriteParseRoundTrip) {
  RunConfig c = default_config("goal2", RobotKind::kCar);
  c.mode = FilterMode::kDobCbf;
  c.seed = 17;
  c.dob.gain = 7.5;
  c.ppo.hidden = {32, 16, 8};
  c.filter_weights = Vec2(2.0, 0.5);
  c.error_bound_auto = false;
  c.dob.error_bound = 0.1234567890123;
  std::stringstream s;
  write_config(s, c);
  const RunConfig back = parse_config(s);
  EXPECT_EQ(config_entries(back), config_entries(c));
}

TEST(Config, PresetAppliesBeforeOtherKeys) {
  std::istringstream in("task.n_hazards = 2\n# comment\ntask.preset = goal2  # trailing\n");
  const RunConfig c = parse_config(in);
  EXPECT_EQ(c.task_name, "goal2");
  EXPECT_EQ(c.task.n_hazards, 2);
}

TEST(Config, BadLinesNameTheLine) {
  std::istringstream a("task.preset = goal1\nnot a setting\n");
  try {
    parse_config(a);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  std::istringstream b("no.such.key = 1\n");
  EXPECT_THROW(parse_config(b), std::invalid_argument);
  std::istringstream c("dob.gain = fast\n");
  EXPECT_THROW(parse_config(c), std::invalid_argument);
  std::istringstream d("dob.gain = -1\n");
  EXPECT_THROW(parse_config(d), std::invalid_argument);
}

TEST(Config, ReferenceListsEveryKey) {
  const std::string ref = defaults_reference();
  for (const auto& [k, v] : config_entries(RunConfig{})) EXPECT_NE(ref.find(k + " = "), std::string::npos) << k;
}

TEST(Seeds, DerivedStreamsDiffer) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t m = 0; m < 20; ++m) {
    for (std::uint64_t s = 1; s <= 6; ++s) seen.insert(derive_seed(m, s));
  }
  EXPECT_EQ(seen.size(), 120u);
  EXPECT_EQ(derive_seed(3, seed_stream::kEnv), derive_seed(3, seed_stream::kEnv));
}
