#include "resdob/cbf.hpp"

#include <cmath>
#include <stdexcept>

namespace resdob {

namespace {

constexpr double kDegenerateDistance = 1e-9;

BarrierGeometry circle_geometry(const State& x, const CircleObstacle& obs, double t) {
  BarrierGeometry g;
  const Vec2 rel = x.position() - obs.center_at(t);
  const double dist = rel.norm();
  g.h = dist - obs.radius - obs.robot_radius;
  if (dist < kDegenerateDistance) {
    g.degenerate = true;
    return g;
  }
  const Vec2 n = rel / dist;
  const Eigen::Matrix2d hpp = (Eigen::Matrix2d::Identity() - n * n.transpose()) / dist;
  g.grad.head<2>() = n;
  g.hessian.topLeftCorner<2, 2>() = hpp;
  g.h_t = -n.dot(obs.velocity);
  g.grad_t.head<2>() = -hpp * obs.velocity;
  g.h_tt = obs.velocity.dot(hpp * obs.velocity);
  return g;
}

BarrierGeometry wall_geometry(const State& x, const WallBarrier& wall) {
  BarrierGeometry g;
  g.h = h_wall(x, wall);
  g.grad.head<2>() = wall.normal;
  return g;
}

}  // namespace

void CbfConfig::validate() const {
  if (!(beta1 > 0.0 && beta2 > 0.0)) throw std::invalid_argument("cbf betas must be > 0");
  if (relative_degree != 2) throw std::invalid_argument("only relative degree 2 is supported");
}

double h_circle(const State& x, const CircleObstacle& obs, double t) {
  return (x.position() - obs.center_at(t)).norm() - obs.radius - obs.robot_radius;
}

double h_wall(const State& x, const WallBarrier& wall) {
  return wall.normal.dot(x.position()) + wall.offset;
}

double barrier_value(const State& x, const Barrier& barrier, double t) {
  if (const auto* c = std::get_if<CircleObstacle>(&barrier)) return h_circle(x, *c, t);
  return h_wall(x, std::get<WallBarrier>(barrier));
}

BarrierGeometry barrier_geometry(const State& x, const Barrier& barrier, double t) {
  if (const auto* c = std::get_if<CircleObstacle>(&barrier)) return circle_geometry(x, *c, t);
  return wall_geometry(x, std::get<WallBarrier>(barrier));
}

ModelEvaluation evaluate_model(const State& x, const ModelSnapshot& model) {
  ModelEvaluation ev{model_affine(x, model.kind, model.params),
                     model_drift_jacobian(x, model.kind, model.params)};
  if (model.residual != nullptr && model.residual->enabled) {
    const ControlAffine r = residual_terms(*model.residual, x);
    ev.affine.drift += r.drift;
    ev.affine.input += r.input;
    ev.drift_jacobian += residual_drift_jacobian(*model.residual, x);
  }
  return ev;
}

LieTerms lie_terms(const State& x, const Barrier& barrier, const ModelSnapshot& model, double t) {
  return lie_terms(x, barrier, evaluate_model(x, model), t);
}

LieTerms lie_terms(const State& x, const Barrier& barrier, const ModelEvaluation& model, double t) {
  LieTerms out;
  const BarrierGeometry geo = barrier_geometry(x, barrier, t);
  out.h = geo.h;
  if (geo.degenerate) {
    out.degenerate = true;
    return out;
  }
  const Vec6& f = model.affine.drift;

  out.lf_h = geo.grad.dot(f) + geo.h_t;
  out.grad_lf_h = geo.hessian * f + model.drift_jacobian.transpose() * geo.grad + geo.grad_t;
  const double dt_lf_h = geo.grad_t.dot(f) + geo.h_tt;
  out.lf2_h = out.grad_lf_h.dot(f) + dt_lf_h;
  out.lg_lf_h = (out.grad_lf_h.transpose() * model.affine.input).transpose();
  return out;
}

BarrierConstraint build_constraint(const State& x, const Barrier& barrier,
                                   const ModelSnapshot& model, const Vec6& d_hat,
                                   double error_bound, const CbfConfig& cfg, double t) {
  return build_constraint(x, barrier, evaluate_model(x, model), d_hat, error_bound, cfg, t);
}

BarrierConstraint build_constraint(const State& x, const Barrier& barrier,
                                   const ModelEvaluation& model, const Vec6& d_hat,
                                   double error_bound, const CbfConfig& cfg, double t) {
  const LieTerms lie = lie_terms(x, barrier, model, t);
  BarrierConstraint c;
  c.h = lie.h;
  if (lie.degenerate) {
    c.coeff.setZero();
    c.rhs = -1.0;
    c.degenerate = true;
    return c;
  }
  c.h_dot = lie.lf_h;
  c.phi1 = lie.lf_h + cfg.beta1 * lie.h;
  c.lie_grad_norm = lie.grad_lf_h.norm();
  c.coeff = lie.lg_lf_h;

  double rhs = lie.lf2_h + cfg.beta1 * lie.lf_h;
  if (cfg.robustness != Robustness::kNone) rhs += lie.grad_lf_h.dot(d_hat);
  if (cfg.robustness == Robustness::kDobPlusBound) rhs -= c.lie_grad_norm * error_bound;
  rhs += cfg.beta2 * c.phi1;
  c.rhs = rhs;
  return c;
}

}  // namespace resdob
