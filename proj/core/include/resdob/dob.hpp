#pragma once

#include <functional>

#include "resdob/dynamics.hpp"

namespace resdob {

struct DobConfig {
  double gain = 10.0;     // a, 1/s
  double period = 0.02;   // T, s
  double error_bound = 0.0;

  void validate() const;
};

/// Piecewise-constant disturbance observer.
///
/// The predictor integrates
///   x_hat' = nominal + residual + d_hat - a (x_hat - x)
/// and every `period` seconds the estimate is reset to
///   d_hat = -a / (exp(a T) - 1) * (x_hat - x),
/// then held until the next update.
struct DobState {
  Vec6 x_hat = Vec6::Zero();
  Vec6 d_hat = Vec6::Zero();
  double gain = 10.0;
  double period = 0.02;
  double error_bound = 0.0;
  double last_update_time = 0.0;
  bool initialized = false;
};

DobState make_dob(const DobConfig& cfg, const State& x0, double t0);

/// Advances the predictor by dt. The measured state is taken to move linearly
/// from `x` to `x_next` over the step; pass x_next == x for a frozen measurement.
/// `nominal` and `residual` are the model derivatives at (x, u). d_hat is not
/// modified.
DobState predictor_step(const DobState& dob, const State& x, const State& x_next,
                        const StateDeriv& nominal, const StateDeriv& residual, double dt);
DobState predictor_step(const DobState& dob, const State& x, const StateDeriv& nominal,
                        const StateDeriv& residual, double dt);

/// Model derivative (nominal + residual) at a measured state, control fixed.
using ModelFn = std::function<StateDeriv(const State&)>;

/// As above, but the measured state inside the step follows the model's own
/// rollout from x (with d_hat), shifted linearly to end at x_next, and the
/// model is re-evaluated along it at every RK4 stage.
DobState predictor_step(const DobState& dob, const State& x, const State& x_next,
                        const ModelFn& model, double dt);

/// -a / (exp(a T) - 1)
double pc_coefficient(double gain, double period);

/// Piecewise-constant estimation law at the sampling instant t.
DobState pc_update(const DobState& dob, const State& x, double t);

/// True once `period` has elapsed since the last estimate (tolerant to
/// accumulated floating-point drift in t).
bool pc_update_due(const DobState& dob, double t);

}  // namespace resdob
