#include "resdob/safety_layer.hpp"

#include <stdexcept>

namespace resdob {

SafetyLayer::SafetyLayer(const RunConfig& cfg, std::uint64_t residual_seed) {
  ResidualConfig rc = cfg.residual;
  rc.enabled = cfg.residual_active();
  residual_ = make_residual_model(rc, residual_seed);
  init(cfg);
}

SafetyLayer::SafetyLayer(const RunConfig& cfg, ResidualModel residual)
    : residual_(std::move(residual)) {
  residual_.enabled = cfg.residual_active();
  init(cfg);
}

void SafetyLayer::init(const RunConfig& cfg) {
  cfg.validate();
  kind_ = cfg.task.robot;
  box_ = cfg.task.box;
  nominal_ = default_nominal_params(kind_);
  cbf_ = cfg.cbf;
  dob_cfg_ = cfg.dob;
  use_cbf_ = cfg.filter_active();
  use_dob_ = cfg.dob_active();
  use_residual_ = cfg.residual_active();
  cbf_.robustness = cfg.robustness();
  error_bound_ = cfg.dob.error_bound;
  P_ = cfg.filter_weights.asDiagonal();
  model_.kind = kind_;
  model_.params = nominal_;
  model_.residual = use_residual_ ? &residual_ : nullptr;
  dob_ = make_dob(dob_cfg_, State{}, 0.0);
}

void SafetyLayer::set_error_bound(double bound) {
  if (!(bound >= 0.0)) throw std::invalid_argument("error bound must be >= 0");
  error_bound_ = bound;
}

void SafetyLayer::set_model_params(const ModelParams& params) {
  params.validate();
  nominal_ = params;
  model_.params = params;
}

void SafetyLayer::reset(const State& x0, double t0) { dob_ = make_dob(dob_cfg_, x0, t0); }

StateDeriv SafetyLayer::model_deriv(const State& x, const Vec2& u) const {
  StateDeriv d = model_affine(x, kind_, nominal_).eval(u);
  if (use_residual_) d += predict_residual(residual_, x, u);
  return d;
}

Vec6 SafetyLayer::disturbance_estimate() const {
  if (override_) return *override_;
  return use_dob_ ? dob_.d_hat : Vec6::Zero();
}

SafetyLayer::Decision SafetyLayer::filter(const State& x, double t,
                                          const std::vector<Barrier>& barriers,
                                          const Vec2& u_rl) {
  if (use_dob_ && pc_update_due(dob_, t)) dob_ = pc_update(dob_, x, t);

  Decision d;
  d.u_safe = u_rl;
  if (!use_cbf_) return d;

  d.filtered = true;
  model_.residual = use_residual_ ? &residual_ : nullptr;  // the layer may have been copied
  const Vec6 d_hat = disturbance_estimate();
  const ModelEvaluation ev = evaluate_model(x, model_);
  d.constraints.reserve(barriers.size());
  for (const Barrier& b : barriers) {
    BarrierConstraint c = build_constraint(x, b, ev, d_hat, error_bound_, cbf_, 0.0);
    d.degenerate = d.degenerate || c.degenerate;
    d.constraints.push_back(std::move(c));
  }
  const FilterProblem problem =
      FilterProblem::make(P_, u_rl, d.constraints, box_.lower, box_.upper);
  d.qp = solve(problem);
  d.u_safe = d.qp.u_safe;
  return d;
}

double SafetyLayer::observe(const State& x, const Vec2& u, const State& x_next, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("observe: dt must be > 0");
  if (use_dob_) {
    // The residual only sees velocities and heading, so one evaluation at the
    // interval midpoint stands in for it across the predictor sub-steps.
    const State x_mid = State::from_vec(0.5 * (x.vec() + x_next.vec()));
    const StateDeriv res = use_residual_ ? predict_residual(residual_, x_mid, u) : StateDeriv::Zero();
    dob_ = predictor_step(
        dob_, x, x_next,
        [&](const State& s) -> StateDeriv { return model_affine(s, kind_, nominal_).eval(u) + res; }, dt);
  }
  if (!use_residual_) return 0.0;
  // The difference quotient is paired with the midpoint state, where it is
  // second-order accurate.
  const StateDeriv xdot = (x_next.vec() - x.vec()) / dt;
  const State x_mid = State::from_vec(0.5 * (x.vec() + x_next.vec()));
  const StateDeriv nominal = model_affine(x_mid, kind_, nominal_).eval(u);
  const ResidualUpdate r = update_residual(residual_, x_mid, u, xdot, nominal);
  return r.loss;
}

}  // namespace resdob
