#pragma once

#include <Eigen/Dense>

#include <functional>
#include <variant>

namespace resdob {

inline constexpr int kStateDim = 6;
inline constexpr int kControlDim = 2;

using Vec2 = Eigen::Vector2d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat62 = Eigen::Matrix<double, 6, 2>;

// Component order shared by State, StateDeriv and every 6-vector in the library.
enum StateIndex : int { kXp = 0, kYp = 1, kTheta = 2, kVx = 3, kVy = 4, kOmega = 5 };

/// Planar robot state: pose plus body-frame velocities. Yaw is kept unwrapped.
struct State {
  double x_p = 0.0;
  double y_p = 0.0;
  double theta_p = 0.0;
  double v_x = 0.0;
  double v_y = 0.0;
  double omega = 0.0;

  Vec6 vec() const;
  static State from_vec(const Vec6& v);
  bool finite() const;
  Vec2 position() const { return {x_p, y_p}; }
};

/// Time derivative of a State, per-second units, indexed by StateIndex.
using StateDeriv = Vec6;

/// Maps an angle to (-pi, pi].
double normalize_angle(double angle);

enum class RobotKind { kPoint, kCar };

struct PointControl {
  double c_v = 0.0;
  double c_omega = 0.0;
};

struct CarControl {
  double c_l = 0.0;
  double c_r = 0.0;
};

using Control = std::variant<PointControl, CarControl>;

Vec2 to_vector(const Control& control);
Control make_control(RobotKind kind, const Vec2& u);
RobotKind kind_of(const Control& control);

/// Axis-aligned admissible input set.
struct ControlBox {
  Vec2 lower{-1.0, -1.0};
  Vec2 upper{1.0, 1.0};

  bool contains(const Vec2& u, double tol = 0.0) const;
  Vec2 clamp(const Vec2& u) const;
};

/// Gains of the kinematic models. slip_gain, slip_coupling and omega_damping are
/// plant-only terms and are zero in a nominal model.
struct ModelParams {
  double k_omega = 1.0;
  double k_v1 = 1.0;
  double k_v2 = 1.0;
  double slip_gain = 0.0;
  double slip_coupling = 0.0;
  double omega_damping = 0.0;

  /// Throws std::invalid_argument unless all gains are strictly positive and
  /// the plant-only terms are non-negative.
  void validate() const;
  /// Multiplies k_omega, k_v1 and k_v2 by `factor`; other terms untouched.
  ModelParams scaled(double factor) const;
};

ModelParams default_nominal_params(RobotKind kind);
/// Nominal gains times `mismatch` plus the slip and yaw-damping terms that the
/// nominal model leaves out.
ModelParams default_true_params(RobotKind kind, double mismatch);

/// xdot = drift + input * u.
struct ControlAffine {
  Vec6 drift = Vec6::Zero();
  Mat62 input = Mat62::Zero();

  StateDeriv eval(const Vec2& u) const { return drift + input * u; }
};

/// Control-affine split of the model selected by `kind`, including any
/// plant-only terms present in `params`.
ControlAffine model_affine(const State& state, RobotKind kind, const ModelParams& params);

/// d(drift)/dx of model_affine. The input matrix does not depend on the state.
Mat6 model_drift_jacobian(const State& state, RobotKind kind, const ModelParams& params);

StateDeriv nominal_point_deriv(const State& state, const PointControl& control,
                               const ModelParams& params);
StateDeriv nominal_car_deriv(const State& state, const CarControl& control,
                             const ModelParams& params);
StateDeriv nominal_deriv(const State& state, const Control& control, const ModelParams& params);

/// World-frame wind acceleration resolved onto the body velocity channels.
StateDeriv wind_body_accel(const State& state, const Vec2& wind_world);

/// Simulator dynamics: model_affine with `true_params`, plus wind.
StateDeriv true_plant_deriv(const State& state, const Control& control,
                            const ModelParams& true_params, const Vec2& wind_world);

using DerivFn = std::function<StateDeriv(const State&, const Control&)>;

/// One classical Runge-Kutta step with the control held over `dt`.
State integrate(const State& state, const Control& control, const DerivFn& deriv, double dt);

/// RK4 on a raw vector where the derivative may depend on elapsed time within
/// the step (`tau` in [0, dt]).
template <class F>
Vec6 rk4_step(const Vec6& x, double dt, F&& deriv) {
  const Vec6 k1 = deriv(x, 0.0);
  const Vec6 k2 = deriv(x + 0.5 * dt * k1, 0.5 * dt);
  const Vec6 k3 = deriv(x + 0.5 * dt * k2, 0.5 * dt);
  const Vec6 k4 = deriv(x + dt * k3, dt);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace resdob
