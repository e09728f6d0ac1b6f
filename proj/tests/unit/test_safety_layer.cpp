#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "resdob/env.hpp"
#include "resdob/safety_layer.hpp"

using namespace resdob;

namespace {

RunConfig mode_config(FilterMode m) {
  RunConfig c = default_config("goal1", RobotKind::kPoint);
  c.mode = m;
  c.error_bound_auto = false;
  c.dob.error_bound = 0.3;
  return c;
}

State near_hazard() {
  State x;
  x.x_p = 0.0;
  x.y_p = 0.0;
  x.v_x = 0.6;
  x.v_y = 0.05;
  return x;
}

std::vector<Barrier> one_circle() { return {CircleObstacle{Vec2(0.9, 0.1), Vec2(-0.05, 0.02), 0.4, 0.1}}; }

}  // namespace

TEST(SafetyLayer, NoneModePassesActionThrough) {
  SafetyLayer layer(mode_config(FilterMode::kNone), 1);
  layer.reset(near_hazard(), 0.0);
  const Vec2 u(0.9, -0.3);
  const auto d = layer.filter(near_hazard(), 0.0, one_circle(), u);
  EXPECT_FALSE(d.filtered);
  EXPECT_EQ(d.u_safe, u);
  EXPECT_TRUE(d.constraints.empty());
}

TEST(SafetyLayer, ConstraintsUseTheModeRobustness) {
  for (FilterMode m : {FilterMode::kCbf, FilterMode::kDobCbf, FilterMode::kResCbf, FilterMode::kResDobCbf}) {
    const RunConfig cfg = mode_config(m);
    SafetyLayer layer(cfg, 2);
    const State x = near_hazard();
    layer.reset(x, 0.0);
    Vec6 d;
    d << 0.0, 0.0, 0.1, -0.2, 0.15, 0.05;
    layer.set_disturbance_override(d);
    const auto dec = layer.filter(x, 0.0, one_circle(), Vec2(1.0, 0.0));
    ASSERT_EQ(dec.constraints.size(), 1u);

    CbfConfig cbf = cfg.cbf;
    cbf.robustness = cfg.robustness();
    const BarrierConstraint want = build_constraint(x, one_circle()[0], layer.model(), d, 0.3, cbf, 0.0);
    EXPECT_NEAR(dec.constraints[0].rhs, want.rhs, 1e-12) << to_string(m);
    EXPECT_EQ(dec.constraints[0].coeff, want.coeff) << to_string(m);

    if (uses_dob(m)) {
      cbf.robustness = Robustness::kNone;
      const BarrierConstraint plain = build_constraint(x, one_circle()[0], layer.model(), d, 0.3, cbf, 0.0);
      const LieTerms lie = lie_terms(x, one_circle()[0], layer.model(), 0.0);
      EXPECT_NEAR(dec.constraints[0].rhs, plain.rhs + lie.grad_lf_h.dot(d) - 0.3 * lie.grad_lf_h.norm(), 1e-12);
    } else {
      EXPECT_EQ(cfg.robustness(), Robustness::kNone);
    }
  }
}

TEST(SafetyLayer, DobModeTightensByTheBound) {
  const RunConfig cfg = mode_config(FilterMode::kDobCbf);
  SafetyLayer layer(cfg, 3);
  const State x = near_hazard();
  layer.reset(x, 0.0);
  layer.set_disturbance_override(Vec6::Zero());
  const double loose = layer.filter(x, 0.0, one_circle(), Vec2::Zero()).constraints[0].rhs;
  layer.set_error_bound(0.8);
  const auto tight = layer.filter(x, 0.0, one_circle(), Vec2::Zero()).constraints[0];
  EXPECT_NEAR(loose - tight.rhs, 0.5 * tight.lie_grad_norm, 1e-12);
  EXPECT_GT(tight.lie_grad_norm, 0.0);
}

TEST(SafetyLayer, ObserveFeedsTheActiveModules) {
  Environment env(goal1_task(RobotKind::kPoint));
  for (FilterMode m : all_filter_modes()) {
    SafetyLayer layer(mode_config(m), 4);
    env.reset(5);
    layer.reset(env.state(), env.time());
    double loss = 0.0;
    for (int i = 0; i < 10; ++i) {
      const State x = env.state();
      const Vec2 u(0.5, 0.2);
      layer.filter(x, env.time(), env.barriers(), u);
      env.step(u);
      loss += layer.observe(x, u, env.state(), env.config().dt);
    }
    EXPECT_EQ(loss > 0.0, uses_residual(m)) << to_string(m);
    EXPECT_EQ(layer.disturbance_estimate().isZero(0.0), !uses_dob(m)) << to_string(m);
  }
}

namespace {

// Worst h over ten episodes with an aggressive policy, filtered with the
// plant's own parameters and the exact disturbance.
double oracle_worst_h(RobotKind robot, double dt) {
  RunConfig cfg = mode_config(FilterMode::kDobCbf);
  cfg.task = goal2_task(robot);
  cfg.task.dt = dt;
  cfg.task.episode_length = static_cast<int>(std::lround(8.0 / dt));
  cfg.dob.error_bound = 0.0;
  Environment env(cfg.task);
  SafetyLayer layer(cfg, 6);
  layer.set_model_params(env.true_params());
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  double worst = std::numeric_limits<double>::infinity();
  for (std::uint64_t ep = 0; ep < 10; ++ep) {
    env.reset(100 + ep);
    layer.reset(env.state(), env.time());
    for (int k = 0; k < cfg.task.episode_length; ++k) {
      const State x = env.state();
      const double t = env.time();
      const Vec2 u_rl(1.0, U(rng));
      // The wind does not depend on u, so one probe gives the exact disturbance.
      layer.set_disturbance_override(env.plant_deriv(x, u_rl, t) - layer.model_deriv(x, u_rl));
      const auto dec = layer.filter(x, t, env.barriers(), u_rl);
      env.step(dec.u_safe);
      worst = std::min(worst, env.h_min());
    }
  }
  return worst;
}

}  // namespace

// The exact-model filter is a continuous-time guarantee. A hazard closing at
// hazard_speed while u is held for dt is tracked to within hazard_speed * dt,
// so violations stay at that scale and shrink with the step.
TEST(SafetyLayer, OracleModelKeepsAggressivePolicySafe) {
  for (RobotKind robot : {RobotKind::kPoint, RobotKind::kCar}) {
    const char* name = robot == RobotKind::kPoint ? "point" : "car";
    const double speed = goal2_task(robot).hazard_speed;
    const double coarse = oracle_worst_h(robot, 0.02);
    const double fine = oracle_worst_h(robot, 0.01);
    EXPECT_GT(coarse, -speed * 0.02) << name;
    EXPECT_GT(fine, -speed * 0.01) << name;
    if (coarse < 0.0) EXPECT_GT(fine, 0.75 * coarse) << name;
  }
}
