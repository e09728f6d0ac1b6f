#include "resdob/dynamics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace resdob {

Vec6 State::vec() const {
  Vec6 v;
  v << x_p, y_p, theta_p, v_x, v_y, omega;
  return v;
}

State State::from_vec(const Vec6& v) {
  return State{v[kXp], v[kYp], v[kTheta], v[kVx], v[kVy], v[kOmega]};
}

bool State::finite() const { return vec().allFinite(); }

double normalize_angle(double angle) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double r = std::remainder(angle, kTwoPi);
  if (r <= -std::numbers::pi) r += kTwoPi;
  return r;
}

Vec2 to_vector(const Control& control) {
  if (const auto* p = std::get_if<PointControl>(&control)) return {p->c_v, p->c_omega};
  const auto& c = std::get<CarControl>(control);
  return {c.c_l, c.c_r};
}

Control make_control(RobotKind kind, const Vec2& u) {
  if (kind == RobotKind::kPoint) return PointControl{u[0], u[1]};
  return CarControl{u[0], u[1]};
}

RobotKind kind_of(const Control& control) {
  return std::holds_alternative<PointControl>(control) ? RobotKind::kPoint : RobotKind::kCar;
}

bool ControlBox::contains(const Vec2& u, double tol) const {
  return (u.array() >= lower.array() - tol).all() && (u.array() <= upper.array() + tol).all();
}

Vec2 ControlBox::clamp(const Vec2& u) const { return u.cwiseMax(lower).cwiseMin(upper); }

void ModelParams::validate() const {
  if (!(k_omega > 0.0 && k_v1 > 0.0 && k_v2 > 0.0)) {
    throw std::invalid_argument("model gains must be strictly positive");
  }
  if (!(slip_gain >= 0.0 && slip_coupling >= 0.0 && omega_damping >= 0.0)) {
    throw std::invalid_argument("slip and damping terms must be non-negative");
  }
}

ModelParams ModelParams::scaled(double factor) const {
  ModelParams p = *this;
  p.k_omega *= factor;
  p.k_v1 *= factor;
  p.k_v2 *= factor;
  return p;
}

ModelParams default_nominal_params(RobotKind kind) {
  ModelParams p;
  if (kind == RobotKind::kPoint) {
    p.k_omega = 2.0;
    p.k_v1 = 1.0;
    p.k_v2 = 2.0;
  } else {
    p.k_omega = 4.0;
    p.k_v1 = 4.0;
    p.k_v2 = 0.5;
  }
  return p;
}

ModelParams default_true_params(RobotKind kind, double mismatch) {
  ModelParams p = default_nominal_params(kind).scaled(mismatch);
  if (kind == RobotKind::kPoint) {
    p.slip_gain = 4.0;
    p.slip_coupling = 0.2;
    p.omega_damping = 2.0;
  } else {
    p.slip_gain = 8.0;
    p.slip_coupling = 0.3;
    p.omega_damping = 3.0;
  }
  return p;
}

ControlAffine model_affine(const State& s, RobotKind kind, const ModelParams& p) {
  ControlAffine m;
  const double c = std::cos(s.theta_p);
  const double sn = std::sin(s.theta_p);
  m.drift[kXp] = s.v_x * c;
  m.drift[kYp] = s.v_x * sn;
  if (kind == RobotKind::kPoint) {
    // theta' = K_w c_w,  v_x' = K_v2 (K_v1 c_v - v_x)
    m.drift[kVx] = -p.k_v2 * s.v_x;
    m.input(kTheta, 1) = p.k_omega;
    m.input(kVx, 0) = p.k_v2 * p.k_v1;
  } else {
    // theta' = w,  v_x' = K_v1 (K_v2 (c_l + c_r) - v_x),  w' = K_w (c_r - c_l)
    m.drift[kTheta] = s.omega;
    m.drift[kVx] = -p.k_v1 * s.v_x;
    m.input(kVx, 0) = p.k_v1 * p.k_v2;
    m.input(kVx, 1) = p.k_v1 * p.k_v2;
    m.input(kOmega, 0) = -p.k_omega;
    m.input(kOmega, 1) = p.k_omega;
  }
  m.drift[kVy] = -p.slip_gain * s.v_y + p.slip_coupling * s.v_x * s.omega;
  m.drift[kOmega] += -p.omega_damping * s.omega;
  return m;
}

Mat6 model_drift_jacobian(const State& s, RobotKind kind, const ModelParams& p) {
  Mat6 j = Mat6::Zero();
  const double c = std::cos(s.theta_p);
  const double sn = std::sin(s.theta_p);
  j(kXp, kTheta) = -s.v_x * sn;
  j(kXp, kVx) = c;
  j(kYp, kTheta) = s.v_x * c;
  j(kYp, kVx) = sn;
  if (kind == RobotKind::kPoint) {
    j(kVx, kVx) = -p.k_v2;
  } else {
    j(kTheta, kOmega) = 1.0;
    j(kVx, kVx) = -p.k_v1;
  }
  j(kVy, kVy) = -p.slip_gain;
  j(kVy, kVx) = p.slip_coupling * s.omega;
  j(kVy, kOmega) = p.slip_coupling * s.v_x;
  j(kOmega, kOmega) = -p.omega_damping;
  return j;
}

StateDeriv nominal_point_deriv(const State& state, const PointControl& control,
                               const ModelParams& params) {
  return model_affine(state, RobotKind::kPoint, params).eval({control.c_v, control.c_omega});
}

StateDeriv nominal_car_deriv(const State& state, const CarControl& control,
                             const ModelParams& params) {
  return model_affine(state, RobotKind::kCar, params).eval({control.c_l, control.c_r});
}

StateDeriv nominal_deriv(const State& state, const Control& control, const ModelParams& params) {
  return model_affine(state, kind_of(control), params).eval(to_vector(control));
}

StateDeriv wind_body_accel(const State& state, const Vec2& w) {
  StateDeriv d = StateDeriv::Zero();
  const double c = std::cos(state.theta_p);
  const double s = std::sin(state.theta_p);
  d[kVx] = c * w.x() + s * w.y();
  d[kVy] = -s * w.x() + c * w.y();
  return d;
}

StateDeriv true_plant_deriv(const State& state, const Control& control,
                            const ModelParams& true_params, const Vec2& wind_world) {
  return model_affine(state, kind_of(control), true_params).eval(to_vector(control)) +
         wind_body_accel(state, wind_world);
}

State integrate(const State& state, const Control& control, const DerivFn& deriv, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("integrate: dt must be positive");
  const Vec6 next = rk4_step(state.vec(), dt, [&](const Vec6& x, double) {
    return deriv(State::from_vec(x), control);
  });
  return State::from_vec(next);
}

}  // namespace resdob
