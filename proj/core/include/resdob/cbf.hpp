#pragma once

#include <variant>

#include "resdob/dynamics.hpp"
#include "resdob/residual.hpp"

namespace resdob {

/// Disc moving with constant velocity; center(t) = center + velocity * t.
struct CircleObstacle {
  Vec2 center = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();
  double radius = 0.0;
  double robot_radius = 0.1;

  Vec2 center_at(double t) const { return center + velocity * t; }
};

/// Half-plane normal . p + offset >= 0, normal pointing into the safe side.
struct WallBarrier {
  Vec2 normal{1.0, 0.0};
  double offset = 0.0;
};

using Barrier = std::variant<CircleObstacle, WallBarrier>;

/// coeff . u + rhs >= 0.
struct BarrierConstraint {
  Eigen::VectorXd coeff = Eigen::VectorXd::Zero(kControlDim);
  double rhs = 0.0;
  bool degenerate = false;

  // Diagnostics at the evaluation point.
  double h = 0.0;
  double h_dot = 0.0;
  double phi1 = 0.0;
  double lie_grad_norm = 0.0;
};

enum class Robustness { kNone, kDob, kDobPlusBound };

struct CbfConfig {
  double beta1 = 2.0;
  double beta2 = 2.0;
  int relative_degree = 2;
  Robustness robustness = Robustness::kNone;

  void validate() const;
};

/// Model the filter reasons with: a kinematic model plus an optional learned
/// residual. The residual pointer is non-owning and may be null.
struct ModelSnapshot {
  RobotKind kind = RobotKind::kPoint;
  ModelParams params;
  const ResidualModel* residual = nullptr;
};

double h_circle(const State& x, const CircleObstacle& obs, double t);
double h_wall(const State& x, const WallBarrier& wall);
double barrier_value(const State& x, const Barrier& barrier, double t);

/// h with its state and time derivatives, as used by the HOCBF recursion.
struct BarrierGeometry {
  double h = 0.0;
  Vec6 grad = Vec6::Zero();
  Mat6 hessian = Mat6::Zero();
  double h_t = 0.0;
  Vec6 grad_t = Vec6::Zero();
  double h_tt = 0.0;
  bool degenerate = false;
};

BarrierGeometry barrier_geometry(const State& x, const Barrier& barrier, double t);

/// Lie derivatives of h along f = f_model + df and g = g_model + dg.
struct LieTerms {
  double h = 0.0;
  double lf_h = 0.0;          // dh/dt along the drift, including the explicit time term
  Vec6 grad_lf_h = Vec6::Zero();
  double lf2_h = 0.0;
  Eigen::VectorXd lg_lf_h = Eigen::VectorXd::Zero(kControlDim);
  bool degenerate = false;
};

/// The model's control-affine split and drift Jacobian at one state, shared
/// by every barrier evaluated there.
struct ModelEvaluation {
  ControlAffine affine;
  Mat6 drift_jacobian = Mat6::Zero();
};

ModelEvaluation evaluate_model(const State& x, const ModelSnapshot& model);

LieTerms lie_terms(const State& x, const Barrier& barrier, const ModelSnapshot& model, double t);
LieTerms lie_terms(const State& x, const Barrier& barrier, const ModelEvaluation& model, double t);

/// Relative-degree-two robust HOCBF constraint:
///   Lf^2 h + LgLf h u + b1 Lf h + [grad Lf h] . d_hat
///     - |grad Lf h| error_bound + b2 (Lf h + b1 h) >= 0
/// where the d_hat term is used for kDob and kDobPlusBound and the bound term
/// only for kDobPlusBound. A barrier evaluated at the obstacle center yields
/// the infeasible sentinel 0 . u - 1 >= 0 with `degenerate` set.
BarrierConstraint build_constraint(const State& x, const Barrier& barrier,
                                   const ModelSnapshot& model, const Vec6& d_hat,
                                   double error_bound, const CbfConfig& cfg, double t);
BarrierConstraint build_constraint(const State& x, const Barrier& barrier,
                                   const ModelEvaluation& model, const Vec6& d_hat,
                                   double error_bound, const CbfConfig& cfg, double t);

}  // namespace resdob
