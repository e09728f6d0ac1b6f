#pragma once

#include <vector>

#include <Eigen/Dense>

#include "resdob/cbf.hpp"

namespace resdob {

/// min 0.5 (u - u_rl)^T P (u - u_rl)  s.t.  every barrier constraint, lower <= u <= upper.
struct FilterProblem {
  Eigen::MatrixXd P;
  Eigen::VectorXd u_rl;
  std::vector<BarrierConstraint> constraints;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  /// Validates shapes, symmetry and positive-definiteness of P, and the box.
  /// Throws std::invalid_argument on violation.
  static FilterProblem make(Eigen::MatrixXd P, Eigen::VectorXd u_rl,
                            std::vector<BarrierConstraint> constraints, Eigen::VectorXd lower,
                            Eigen::VectorXd upper);
};

inline constexpr int kMaxFilterDim = 4;
inline constexpr double kSlackPenalty = 1e6;

struct FilterResult {
  Eigen::VectorXd u_safe;
  bool intervened = false;
  double intervention_norm = 0.0;
  double slack_used = 0.0;
  double objective = 0.0;
  /// Indices of constraints active at the solution: barriers are 0..n-1, box
  /// lower bounds n..n+m-1, box upper bounds n+m..n+2m-1.
  std::vector<int> active_constraints;
};

/// Exact solution by enumerating active sets of size <= m. When no point of the
/// box satisfies every barrier, a shared slack s >= 0 is added to each barrier
/// rhs with cost kSlackPenalty * s^2 and the relaxed problem is solved the same way.
FilterResult solve(const FilterProblem& problem);

}  // namespace resdob
