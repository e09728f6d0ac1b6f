#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "resdob/cbf.hpp"

using namespace resdob;

namespace {

CircleObstacle circle(Vec2 c, double r, double rp, Vec2 v = Vec2::Zero()) {
  CircleObstacle o;
  o.center = c;
  o.radius = r;
  o.robot_radius = rp;
  o.velocity = v;
  return o;
}

ModelSnapshot snapshot(RobotKind kind, const ResidualModel* res = nullptr) {
  ModelSnapshot m;
  m.kind = kind;
  m.params = default_true_params(kind, 1.3);
  m.residual = res;
  return m;
}

ControlAffine full_affine(const State& x, const ModelSnapshot& m) {
  ControlAffine a = model_affine(x, m.kind, m.params);
  if (m.residual != nullptr && m.residual->enabled) {
    const ControlAffine r = residual_terms(*m.residual, x);
    a.drift += r.drift;
    a.input += r.input;
  }
  return a;
}

// Numeric Lie derivatives: d/ds of a function along the flow of a vector field,
// with the obstacle time advancing at unit rate for the drift.
double lf_h_numeric(const State& x, const Barrier& b, const ModelSnapshot& m, double t) {
  const double e = 1e-5;
  const Vec6 f = full_affine(x, m).drift;
  return (barrier_value(State::from_vec(x.vec() + e * f), b, t + e) -
          barrier_value(State::from_vec(x.vec() - e * f), b, t - e)) /
         (2 * e);
}

struct NumericConstraint {
  double lf2 = 0.0;
  Vec2 lglf = Vec2::Zero();
  double lf = 0.0;
};

NumericConstraint numeric(const State& x, const Barrier& b, const ModelSnapshot& m, double t) {
  const double e = 1e-4;
  const ControlAffine a = full_affine(x, m);
  NumericConstraint out;
  out.lf = lf_h_numeric(x, b, m, t);
  out.lf2 = (lf_h_numeric(State::from_vec(x.vec() + e * a.drift), b, m, t + e) -
             lf_h_numeric(State::from_vec(x.vec() - e * a.drift), b, m, t - e)) /
            (2 * e);
  for (int j = 0; j < 2; ++j) {
    const Vec6 g = a.input.col(j);
    out.lglf[j] = (lf_h_numeric(State::from_vec(x.vec() + e * g), b, m, t) -
                   lf_h_numeric(State::from_vec(x.vec() - e * g), b, m, t)) /
                  (2 * e);
  }
  return out;
}

State random_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-2.0, 2.0), ang(-3.0, 3.0), v(-1.0, 1.0);
  return State{pos(rng), pos(rng), ang(rng), v(rng), 0.5 * v(rng), v(rng)};
}

}  // namespace

TEST(CircleBarrier, ZeroOnBoundary) {
  const CircleObstacle o = circle(Vec2(1.0, -1.0), 0.4, 0.15);
  State x;
  x.x_p = 1.0 + 0.55;
  x.y_p = -1.0;
  EXPECT_NEAR(h_circle(x, o, 0.0), 0.0, 1e-15);
}

TEST(CircleBarrier, Pythagoras) {
  State x;
  x.x_p = 3.0;
  x.y_p = 4.0;
  EXPECT_DOUBLE_EQ(h_circle(x, circle(Vec2::Zero(), 1.0, 0.5), 0.0), 3.5);
}

TEST(CircleBarrier, MovingObstacleIsPropagated) {
  std::mt19937_64 rng(1);
  const CircleObstacle moving = circle(Vec2::Zero(), 0.5, 0.1, Vec2(1.0, 0.0));
  const CircleObstacle fixed = circle(Vec2(2.0, 0.0), 0.5, 0.1);
  for (int i = 0; i < 10; ++i) {
    const State x = random_state(rng);
    EXPECT_NEAR(h_circle(x, moving, 2.0), h_circle(x, fixed, 0.0), 1e-15);
  }
}

TEST(WallBarrier, AffineValues) {
  WallBarrier left;
  left.normal = Vec2(1.0, 0.0);
  left.offset = 2.1;
  State x;
  EXPECT_DOUBLE_EQ(h_wall(x, left), 2.1);
  x.x_p = -2.1;
  EXPECT_DOUBLE_EQ(h_wall(x, left), 0.0);
  x.x_p = -2.2;
  EXPECT_NEAR(h_wall(x, left), -0.1, 1e-15);
}

TEST(Geometry, DerivativesMatchFiniteDifferences) {
  std::mt19937_64 rng(2);
  const Barrier b = circle(Vec2(0.3, -0.2), 0.4, 0.15, Vec2(0.2, -0.1));
  for (int n = 0; n < 20; ++n) {
    const State x = random_state(rng);
    const double t = 0.7;
    const BarrierGeometry g = barrier_geometry(x, b, t);
    ASSERT_FALSE(g.degenerate);
    const double e = 1e-6;
    for (int j = 0; j < 2; ++j) {
      Vec6 xp = x.vec(), xm = x.vec();
      xp[j] += e;
      xm[j] -= e;
      EXPECT_NEAR(g.grad[j], (barrier_value(State::from_vec(xp), b, t) - barrier_value(State::from_vec(xm), b, t)) / (2 * e), 1e-8);
      const BarrierGeometry gp = barrier_geometry(State::from_vec(xp), b, t);
      const BarrierGeometry gm = barrier_geometry(State::from_vec(xm), b, t);
      for (int i = 0; i < 2; ++i) EXPECT_NEAR(g.hessian(i, j), (gp.grad[i] - gm.grad[i]) / (2 * e), 1e-6);
      EXPECT_NEAR(g.grad_t[j], (gp.h_t - gm.h_t) / (2 * e), 1e-6);
    }
    EXPECT_NEAR(g.h_t, (barrier_value(x, b, t + e) - barrier_value(x, b, t - e)) / (2 * e), 1e-8);
    EXPECT_NEAR(g.h_tt, (barrier_geometry(x, b, t + e).h_t - barrier_geometry(x, b, t - e).h_t) / (2 * e), 1e-6);
  }
}

TEST(Constraint, NominalMatchesNumericLieDerivatives) {
  std::mt19937_64 rng(3);
  CbfConfig cfg;
  cfg.beta1 = 1.7;
  cfg.beta2 = 2.3;
  WallBarrier wall;
  wall.normal = Vec2(std::cos(0.4), std::sin(0.4));
  wall.offset = 2.5;
  const std::vector<Barrier> barriers{circle(Vec2(0.5, 0.5), 0.4, 0.15, Vec2(-0.3, 0.2)), wall};
  for (RobotKind kind : {RobotKind::kPoint, RobotKind::kCar}) {
    const ModelSnapshot m = snapshot(kind);
    for (int n = 0; n < 20; ++n) {
      const State x = random_state(rng);
      for (const Barrier& b : barriers) {
        const double t = 0.3;
        const BarrierConstraint c = build_constraint(x, b, m, Vec6::Zero(), 0.0, cfg, t);
        const NumericConstraint o = numeric(x, b, m, t);
        const double h = barrier_value(x, b, t);
        const double rhs = o.lf2 + cfg.beta1 * o.lf + cfg.beta2 * (o.lf + cfg.beta1 * h);
        EXPECT_NEAR(c.rhs, rhs, 1e-6);
        EXPECT_NEAR(c.coeff[0], o.lglf[0], 1e-6);
        EXPECT_NEAR(c.coeff[1], o.lglf[1], 1e-6);
        EXPECT_NEAR(c.h_dot, o.lf, 1e-8);
      }
    }
  }
}

TEST(Constraint, ResidualEntersLieDerivatives) {
  ResidualModel res = make_residual_model(ResidualConfig{}, 4);
  std::mt19937_64 rng(4);
  res.f_net = nn::make_glorot_mlp(res.f_net.layer_sizes(), rng);
  res.g_net = nn::make_glorot_mlp(res.g_net.layer_sizes(), rng);
  for (auto& w : res.f_net.weights) w *= 0.3;
  for (auto& w : res.g_net.weights) w *= 0.3;
  const ModelSnapshot m = snapshot(RobotKind::kPoint, &res);
  const Barrier b = circle(Vec2(0.0, 0.0), 0.5, 0.15, Vec2(0.1, 0.0));
  CbfConfig cfg;
  for (int n = 0; n < 20; ++n) {
    State x = random_state(rng);
    x.x_p += 3.0;
    const BarrierConstraint c = build_constraint(x, b, m, Vec6::Zero(), 0.0, cfg, 0.0);
    const NumericConstraint o = numeric(x, b, m, 0.0);
    const double rhs = o.lf2 + cfg.beta1 * o.lf + cfg.beta2 * (o.lf + cfg.beta1 * barrier_value(x, b, 0.0));
    EXPECT_NEAR(c.rhs, rhs, 1e-6);
    EXPECT_NEAR(c.coeff[0], o.lglf[0], 1e-6);
    EXPECT_NEAR(c.coeff[1], o.lglf[1], 1e-6);
  }
}

TEST(Constraint, SharedEvaluationMatchesPerBarrier) {
  std::mt19937_64 rng(5);
  const ModelSnapshot m = snapshot(RobotKind::kCar);
  const Barrier b = circle(Vec2(1.0, 0.0), 0.4, 0.15);
  CbfConfig cfg;
  cfg.robustness = Robustness::kDobPlusBound;
  Vec6 d = Vec6::Zero();
  d[kVx] = 0.3;
  for (int n = 0; n < 10; ++n) {
    const State x = random_state(rng);
    const BarrierConstraint a = build_constraint(x, b, m, d, 0.2, cfg, 0.0);
    const BarrierConstraint c = build_constraint(x, b, evaluate_model(x, m), d, 0.2, cfg, 0.0);
    EXPECT_EQ(a.rhs, c.rhs);
    EXPECT_EQ(a.coeff, c.coeff);
  }
}

TEST(Constraint, ErrorBoundShiftsRhsByGradientNorm) {
  std::mt19937_64 rng(6);
  const ModelSnapshot m = snapshot(RobotKind::kPoint);
  const Barrier b = circle(Vec2(-0.5, 0.2), 0.4, 0.15, Vec2(0.1, 0.1));
  CbfConfig cfg;
  cfg.robustness = Robustness::kDobPlusBound;
  Vec6 d;
  d << 0.0, 0.0, 0.1, 0.2, -0.1, 0.05;
  for (int n = 0; n < 10; ++n) {
    const State x = random_state(rng);
    const BarrierConstraint with = build_constraint(x, b, m, d, 0.7, cfg, 0.0);
    const BarrierConstraint without = build_constraint(x, b, m, d, 0.0, cfg, 0.0);
    const LieTerms lie = lie_terms(x, b, m, 0.0);
    EXPECT_NEAR(without.rhs - with.rhs, lie.grad_lf_h.norm() * 0.7, 1e-12);
    EXPECT_EQ(with.coeff, without.coeff);
  }
}

TEST(Constraint, DisturbanceTermFollowsRobustness) {
  const ModelSnapshot m = snapshot(RobotKind::kPoint);
  const Barrier b = circle(Vec2(1.0, 0.0), 0.4, 0.15);
  State x;
  x.v_x = 0.5;
  Vec6 d = Vec6::Zero();
  d[kVx] = -0.4;
  d[kVy] = 0.2;
  CbfConfig none, dob;
  dob.robustness = Robustness::kDob;
  const BarrierConstraint c0 = build_constraint(x, b, m, d, 1.0, none, 0.0);
  const BarrierConstraint c1 = build_constraint(x, b, m, d, 1.0, dob, 0.0);
  const LieTerms lie = lie_terms(x, b, m, 0.0);
  EXPECT_EQ(c0.rhs, build_constraint(x, b, m, Vec6::Zero(), 0.0, none, 0.0).rhs);
  EXPECT_NEAR(c1.rhs - c0.rhs, lie.grad_lf_h.dot(d), 1e-14);
}

TEST(Constraint, HeadOnApproachHandValues) {
  // Robot at h = 1 to the left of a static obstacle, driving straight at it.
  ModelSnapshot m;
  m.kind = RobotKind::kPoint;
  m.params = default_nominal_params(RobotKind::kPoint);
  const CircleObstacle o = circle(Vec2::Zero(), 0.4, 0.1);
  State x;
  x.x_p = -(1.0 + 0.5);
  x.v_x = 1.0;
  CbfConfig cfg;
  cfg.beta1 = 2.0;
  const BarrierConstraint c = build_constraint(x, o, m, Vec6::Zero(), 0.0, cfg, 0.0);
  EXPECT_NEAR(c.h, 1.0, 1e-15);
  EXPECT_NEAR(c.h_dot, -1.0, 1e-15);
  EXPECT_NEAR(c.phi1, cfg.beta1 - 1.0, 1e-15);
  // Flow check of h_dot.
  const double e = 1e-6;
  State xp = x, xm = x;
  xp.x_p += e;
  xm.x_p -= e;
  EXPECT_NEAR((h_circle(xp, o, 0.0) - h_circle(xm, o, 0.0)) / (2 * e) * x.v_x, c.h_dot, 1e-9);
}

TEST(Constraint, CenterOfObstacleIsDegenerate) {
  const ModelSnapshot m = snapshot(RobotKind::kPoint);
  State x;
  x.x_p = 0.5;
  x.y_p = -0.5;
  const BarrierConstraint c =
      build_constraint(x, circle(Vec2(0.5, -0.5), 0.4, 0.15), m, Vec6::Zero(), 0.0, CbfConfig{}, 0.0);
  EXPECT_TRUE(c.degenerate);
  EXPECT_TRUE(c.coeff.isZero(0.0));
  EXPECT_LT(c.rhs, 0.0);
}

TEST(Constraint, WallHasNoTimeTerms) {
  WallBarrier w;
  w.normal = Vec2(0.0, -1.0);
  w.offset = 2.1;
  const BarrierGeometry g = barrier_geometry(State{}, w, 5.0);
  EXPECT_EQ(g.h_t, 0.0);
  EXPECT_EQ(g.h_tt, 0.0);
  EXPECT_TRUE(g.hessian.isZero(0.0));
}

TEST(CbfConfig, Validation) {
  CbfConfig c;
  EXPECT_NO_THROW(c.validate());
  c.beta1 = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.beta1 = 1.0;
  c.relative_degree = 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}
