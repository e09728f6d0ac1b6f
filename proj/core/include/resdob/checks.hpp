#pragma once

#include <cstdint>
#include <string>

namespace resdob {

struct GradcheckReport {
  int nets = 0;
  long long entries_checked = 0;
  double max_rel_error = 0.0;
  double tolerance = 1e-5;
  double seconds = 0.0;
  bool passed = false;
};

/// Central-difference check (h = 1e-5) of every parameter and input gradient
/// on random tanh nets with up to three hidden layers of width <= 32.
GradcheckReport gradcheck(int nets, std::uint64_t seed);

struct QpCheckReport {
  int instances = 0;
  int grid = 401;
  double max_objective_excess = 0.0;  // solver objective minus best feasible grid objective
  double min_residual = 0.0;          // smallest coeff . u + rhs at the solver output
  int slack_instances = 0;
  int projection_cases = 0;
  double projection_max_error = 0.0;
  double seconds = 0.0;
  bool passed = false;
};

/// Random feasible m = 2 instances with up to six barriers in the box
/// [-1, 1]^2, compared against a dense grid search, plus single half-plane
/// cases compared with the closed-form Euclidean projection.
QpCheckReport qp_check(int instances, std::uint64_t seed, int grid = 401);

}  // namespace resdob
