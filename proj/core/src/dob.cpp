#include "resdob/dob.hpp"

#include <cmath>
#include <stdexcept>

namespace resdob {

void DobConfig::validate() const {
  if (!(gain > 0.0)) throw std::invalid_argument("dob gain a must be > 0");
  if (!(period > 0.0)) throw std::invalid_argument("dob period T must be > 0");
  if (!(error_bound >= 0.0)) throw std::invalid_argument("dob error bound must be >= 0");
}

DobState make_dob(const DobConfig& cfg, const State& x0, double t0) {
  cfg.validate();
  DobState d;
  d.x_hat = x0.vec();
  d.gain = cfg.gain;
  d.period = cfg.period;
  d.error_bound = cfg.error_bound;
  d.last_update_time = t0;
  d.initialized = true;
  return d;
}

DobState predictor_step(const DobState& dob, const State& x, const State& x_next,
                        const StateDeriv& nominal, const StateDeriv& residual, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("predictor_step: dt must be positive");
  const Vec6 drive = nominal + residual + dob.d_hat;
  const Vec6 x0 = x.vec();
  const Vec6 slope = (x_next.vec() - x0) / dt;
  DobState next = dob;
  next.x_hat = rk4_step(dob.x_hat, dt, [&](const Vec6& x_hat, double tau) -> Vec6 {
    return drive - dob.gain * (x_hat - (x0 + tau * slope));
  });
  return next;
}

DobState predictor_step(const DobState& dob, const State& x, const StateDeriv& nominal,
                        const StateDeriv& residual, double dt) {
  return predictor_step(dob, x, x, nominal, residual, dt);
}

DobState predictor_step(const DobState& dob, const State& x, const State& x_next,
                        const ModelFn& model, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("predictor_step: dt must be positive");
  // Measured path between samples: the model's own rollout from x with a
  // constant derivative correction c chosen so that it ends at x_next. An
  // unmodelled velocity term then integrates into the position channels.
  const Vec6 x0 = x.vec();
  Vec6 c = Vec6::Zero();
  auto ref_deriv = [&](const Vec6& s, double) -> Vec6 { return model(State::from_vec(s)) + dob.d_hat + c; };
  for (int it = 0; it < 4; ++it) {
    const Vec6 full = rk4_step(rk4_step(x0, 0.5 * dt, ref_deriv), 0.5 * dt, ref_deriv);
    c += (x_next.vec() - full) / dt;
  }
  const Vec6 mid = rk4_step(x0, 0.5 * dt, ref_deriv);
  auto measured = [&](double tau) -> Vec6 {
    if (tau <= 0.0) return x0;
    if (tau >= dt) return x_next.vec();
    return mid;
  };
  DobState next = dob;
  next.x_hat = rk4_step(dob.x_hat, dt, [&](const Vec6& x_hat, double tau) -> Vec6 {
    const Vec6 x_meas = measured(tau);
    return model(State::from_vec(x_meas)) + dob.d_hat - dob.gain * (x_hat - x_meas);
  });
  return next;
}

double pc_coefficient(double gain, double period) { return -gain / std::expm1(gain * period); }

DobState pc_update(const DobState& dob, const State& x, double t) {
  DobState next = dob;
  next.d_hat = pc_coefficient(dob.gain, dob.period) * (dob.x_hat - x.vec());
  next.last_update_time = t;
  return next;
}

bool pc_update_due(const DobState& dob, double t) {
  return t - dob.last_update_time >= dob.period * (1.0 - 1e-9);
}

}  // namespace resdob
