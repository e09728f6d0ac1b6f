#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "resdob/disturbance.hpp"
#include "resdob/dynamics.hpp"

using namespace resdob;

namespace {

ModelParams gains(double k_omega, double k_v1, double k_v2) {
  ModelParams p;
  p.k_omega = k_omega;
  p.k_v1 = k_v1;
  p.k_v2 = k_v2;
  return p;
}

void expect_vec_near(const Vec6& a, const Vec6& b, double tol) {
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(a[i], b[i], tol) << "component " << i;
}

State random_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  return State{u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)};
}

}  // namespace

TEST(PointDeriv, ZeroStateZeroControl) {
  const StateDeriv d = nominal_point_deriv(State{}, PointControl{}, gains(1, 1, 1));
  EXPECT_TRUE(d.isZero(0.0));
}

TEST(PointDeriv, ForwardSpeedDecaysWithoutThrust) {
  const StateDeriv d = nominal_point_deriv(State{0, 0, 0, 1, 0, 0}, PointControl{}, gains(1, 1, 1));
  Vec6 want;
  want << 1, 0, 0, -1, 0, 0;
  expect_vec_near(d, want, 0.0);
}

TEST(PointDeriv, HandEvaluatedHeadingCase) {
  const State x{0, 0, std::numbers::pi / 4, 2, 0, 0};
  const StateDeriv d = nominal_point_deriv(x, PointControl{1.0, 0.5}, gains(2.0, 1.5, 3.0));
  Vec6 want;
  want << 2 * std::cos(std::numbers::pi / 4), 2 * std::sin(std::numbers::pi / 4), 1.0, 3 * (1.5 - 2), 0, 0;
  expect_vec_near(d, want, 1e-12);
}

TEST(CarDeriv, ZeroCase) {
  EXPECT_TRUE(nominal_car_deriv(State{}, CarControl{}, default_nominal_params(RobotKind::kCar)).isZero(0.0));
}

TEST(CarDeriv, EqualWheelsGiveNoYawAcceleration) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> w(-1.0, 1.0);
  const ModelParams p = default_nominal_params(RobotKind::kCar);
  for (int i = 0; i < 50; ++i) {
    State x = random_state(rng);
    x.omega = 0.0;
    const double c = w(rng);
    EXPECT_DOUBLE_EQ(nominal_car_deriv(x, CarControl{c, c}, p)[kOmega], 0.0);
  }
}

TEST(CarDeriv, OpposedWheelsSpinInPlace) {
  ModelParams p = default_nominal_params(RobotKind::kCar);
  p.k_omega = 0.5;
  const StateDeriv d = nominal_car_deriv(State{}, CarControl{-1.0, 1.0}, p);
  EXPECT_NEAR(d[kOmega], 1.0, 1e-12);
  EXPECT_NEAR(d[kVx], 0.0, 1e-12);
}

TEST(Deriv, AffineSplitMatchesDirectEvaluation) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> w(-1.0, 1.0);
  for (RobotKind kind : {RobotKind::kPoint, RobotKind::kCar}) {
    const ModelParams p = default_true_params(kind, 1.5);
    for (int i = 0; i < 50; ++i) {
      const State x = random_state(rng);
      const Vec2 u(w(rng), w(rng));
      const StateDeriv direct = true_plant_deriv(x, make_control(kind, u), p, Vec2::Zero());
      expect_vec_near(model_affine(x, kind, p).eval(u), direct, 1e-12);
    }
  }
}

TEST(Deriv, DriftJacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  for (RobotKind kind : {RobotKind::kPoint, RobotKind::kCar}) {
    const ModelParams p = default_true_params(kind, 1.5);
    for (int n = 0; n < 20; ++n) {
      const State x = random_state(rng);
      const Mat6 jac = model_drift_jacobian(x, kind, p);
      for (int j = 0; j < 6; ++j) {
        Vec6 xp = x.vec(), xm = x.vec();
        xp[j] += 1e-6;
        xm[j] -= 1e-6;
        const Vec6 fd = (model_affine(State::from_vec(xp), kind, p).drift -
                         model_affine(State::from_vec(xm), kind, p).drift) / 2e-6;
        for (int i = 0; i < 6; ++i) EXPECT_NEAR(jac(i, j), fd[i], 1e-6);
      }
    }
  }
}

TEST(Deriv, PureFunctions) {
  std::mt19937_64 rng(5);
  const State x = random_state(rng);
  const ModelParams p = default_true_params(RobotKind::kPoint, 1.5);
  const Control c = PointControl{0.3, -0.2};
  const StateDeriv a = true_plant_deriv(x, c, p, Vec2(0.1, 0.2));
  const StateDeriv b = true_plant_deriv(x, c, p, Vec2(0.1, 0.2));
  EXPECT_EQ(a, b);
}

TEST(TruePlant, MatchesNominalWithoutMismatchOrWind) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> w(-1.0, 1.0);
  for (RobotKind kind : {RobotKind::kPoint, RobotKind::kCar}) {
    const ModelParams p = default_nominal_params(kind);
    for (int i = 0; i < 100; ++i) {
      const State x = random_state(rng);
      const Control c = make_control(kind, Vec2(w(rng), w(rng)));
      EXPECT_EQ(true_plant_deriv(x, c, p, Vec2::Zero()), nominal_deriv(x, c, p));
    }
  }
}

TEST(TruePlant, WindAlongHeading) {
  const StateDeriv d = true_plant_deriv(State{}, PointControl{}, default_nominal_params(RobotKind::kPoint),
                                        Vec2(0.25, 0.0));
  EXPECT_NEAR(d[kVx], 0.25, 1e-15);
  EXPECT_NEAR(d[kVy], 0.0, 1e-15);
}

TEST(TruePlant, WindRotatesIntoBodyFrame) {
  const State x{0, 0, std::numbers::pi / 2, 0, 0, 0};
  const StateDeriv d = wind_body_accel(x, Vec2(0.25, 0.0));
  EXPECT_NEAR(d[kVx], 0.0, 1e-15);
  EXPECT_NEAR(d[kVy], -0.25, 1e-15);
  EXPECT_EQ(d[kXp], 0.0);
  EXPECT_EQ(d[kOmega], 0.0);
}

TEST(TruePlant, OnlyVelocityChannelsCarryWind) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 20; ++i) {
    const StateDeriv d = wind_body_accel(random_state(rng), Vec2(0.3, -0.7));
    EXPECT_EQ(d[kXp], 0.0);
    EXPECT_EQ(d[kYp], 0.0);
    EXPECT_EQ(d[kTheta], 0.0);
    EXPECT_EQ(d[kOmega], 0.0);
    EXPECT_NEAR(std::hypot(d[kVx], d[kVy]), std::hypot(0.3, 0.7), 1e-12);
  }
}

TEST(Params, Validation) {
  EXPECT_NO_THROW(default_true_params(RobotKind::kCar, 1.5).validate());
  EXPECT_THROW(gains(0.0, 1, 1).validate(), std::invalid_argument);
  EXPECT_THROW(gains(1, -1, 1).validate(), std::invalid_argument);
  ModelParams p = gains(1, 1, 1);
  p.slip_gain = -0.1;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Params, ScaledTouchesOnlyGains) {
  ModelParams p = gains(1, 2, 3);
  p.slip_gain = 0.4;
  const ModelParams s = p.scaled(1.5);
  EXPECT_DOUBLE_EQ(s.k_omega, 1.5);
  EXPECT_DOUBLE_EQ(s.k_v1, 3.0);
  EXPECT_DOUBLE_EQ(s.k_v2, 4.5);
  EXPECT_DOUBLE_EQ(s.slip_gain, 0.4);
}

TEST(Controls, RoundTrip) {
  const Vec2 u(0.25, -0.5);
  for (RobotKind kind : {RobotKind::kPoint, RobotKind::kCar}) {
    const Control c = make_control(kind, u);
    EXPECT_EQ(kind_of(c), kind);
    EXPECT_EQ(to_vector(c), u);
  }
  ControlBox box;
  EXPECT_TRUE(box.contains(Vec2(1.0, -1.0)));
  EXPECT_FALSE(box.contains(Vec2(1.01, 0.0)));
  EXPECT_EQ(box.clamp(Vec2(3.0, -0.5)), Vec2(1.0, -0.5));
}

TEST(Angles, Normalize) {
  EXPECT_NEAR(normalize_angle(3 * std::numbers::pi), std::numbers::pi, 1e-12);
  EXPECT_NEAR(normalize_angle(-std::numbers::pi), std::numbers::pi, 1e-12);
  EXPECT_NEAR(normalize_angle(0.5), 0.5, 0.0);
  EXPECT_NEAR(normalize_angle(-7.0), -7.0 + 2 * std::numbers::pi, 1e-12);
}

TEST(Integrate, ZeroDerivativeKeepsState) {
  const State x{1, 2, 3, 4, 5, 6};
  const State y = integrate(x, PointControl{}, [](const State&, const Control&) { return StateDeriv::Zero().eval(); }, 0.02);
  EXPECT_EQ(y.vec(), x.vec());
}

TEST(Integrate, ConstantDerivativeIsExact) {
  Vec6 k;
  k << 1, -2, 0.5, 3, 0, -1;
  const State x{1, 2, 3, 4, 5, 6};
  const State y = integrate(x, PointControl{}, [&](const State&, const Control&) { return k; }, 0.1);
  expect_vec_near(y.vec(), x.vec() + 0.1 * k, 1e-15);
}

TEST(Integrate, RotationOverHundredSteps) {
  State x;
  Vec6 k = Vec6::Zero();
  k[kTheta] = 1.0;
  for (int i = 0; i < 100; ++i) {
    x = integrate(x, PointControl{}, [&](const State&, const Control&) { return k; }, 0.02);
  }
  EXPECT_NEAR(x.theta_p, 2.0, 1e-12);
}

TEST(Integrate, FourthOrderOnExponentialDecay) {
  // xdot = -v_x on the speed channel; RK4 error per step ~ dt^5 / 120.
  auto deriv = [](const State& s, const Control&) {
    Vec6 d = Vec6::Zero();
    d[kVx] = -s.v_x;
    return d;
  };
  double err_coarse = 0.0, err_fine = 0.0;
  for (double dt : {0.1, 0.05}) {
    State x{0, 0, 0, 1, 0, 0};
    const int n = static_cast<int>(std::lround(1.0 / dt));
    for (int i = 0; i < n; ++i) x = integrate(x, PointControl{}, deriv, dt);
    (dt == 0.1 ? err_coarse : err_fine) = std::abs(x.v_x - std::exp(-1.0));
  }
  EXPECT_GT(err_coarse / err_fine, 14.0);
}

TEST(Wind, ZeroMagnitude) {
  WindSpec w;
  w.magnitude = 0.0;
  for (double t : {0.0, 0.3, 10.0}) EXPECT_TRUE(wind_at(w, t).isZero(0.0));
}

TEST(Wind, PointDefaultAtStart) {
  const WindSpec w = default_wind(RobotKind::kPoint);
  EXPECT_DOUBLE_EQ(w.magnitude, 0.25);
  const Vec2 v = wind_at(w, 0.0);
  EXPECT_DOUBLE_EQ(v.x(), 0.25);
  EXPECT_DOUBLE_EQ(v.y(), 0.0);
  EXPECT_DOUBLE_EQ(default_wind(RobotKind::kCar).magnitude, 2.5);
}

TEST(Wind, QuarterTurn) {
  for (double rate : {5.0, 2 * std::numbers::pi * 5}) {
    WindSpec w;
    w.magnitude = 0.7;
    w.angular_rate = rate;
    const Vec2 v = wind_at(w, std::numbers::pi / (2 * rate));
    EXPECT_NEAR(v.x(), 0.0, 1e-12);
    EXPECT_NEAR(v.y(), 0.7, 1e-12);
  }
}

TEST(Wind, ConstantMagnitudeAndRateUnits) {
  const WindSpec rad = default_wind(RobotKind::kPoint, WindRateUnit::kRadPerSecond);
  const WindSpec rev = default_wind(RobotKind::kPoint, WindRateUnit::kRevolutionsPerSecond);
  EXPECT_DOUBLE_EQ(rad.angular_rate, 5.0);
  EXPECT_NEAR(rev.angular_rate, 10 * std::numbers::pi, 1e-12);
  for (double t = 0.0; t < 3.0; t += 0.137) EXPECT_NEAR(wind_at(rad, t).norm(), 0.25, 1e-14);
}

TEST(Wind, Validation) {
  WindSpec w;
  w.magnitude = -1.0;
  EXPECT_THROW(w.validate(), std::invalid_argument);
  w.magnitude = 1.0;
  w.angular_rate = std::nan("");
  EXPECT_THROW(w.validate(), std::invalid_argument);
}
