#pragma once

#include <optional>
#include <vector>

#include "resdob/cbf.hpp"
#include "resdob/config.hpp"
#include "resdob/dob.hpp"
#include "resdob/qp_filter.hpp"
#include "resdob/residual.hpp"

namespace resdob {

/// Per-environment filter stack: observer, residual learner, barrier
/// constraints and the QP. Which parts run is decided by the filter mode.
class SafetyLayer {
 public:
  SafetyLayer(const RunConfig& cfg, std::uint64_t residual_seed);
  SafetyLayer(const RunConfig& cfg, ResidualModel residual);

  /// Restarts the observer at the episode's initial state. The residual model
  /// keeps what it has learned.
  void reset(const State& x0, double t0);

  struct Decision {
    Vec2 u_safe = Vec2::Zero();
    FilterResult qp;
    std::vector<BarrierConstraint> constraints;
    bool filtered = false;  // false when the mode has no CBF
    bool degenerate = false;
  };

  /// Runs the estimation law when due, then solves the filter QP for u_rl.
  Decision filter(const State& x, double t, const std::vector<Barrier>& barriers,
                  const Vec2& u_rl);

  /// Feeds the executed transition: advances the predictor and takes one
  /// residual step on the finite-difference derivative. Returns the residual
  /// loss, or 0 when no residual is learned.
  double observe(const State& x, const Vec2& u, const State& x_next, double dt);

  /// Nominal model plus the current residual at (x, u).
  StateDeriv model_deriv(const State& x, const Vec2& u) const;

  /// Estimate the CBF uses at the next filter call.
  Vec6 disturbance_estimate() const;

  const DobState& dob() const { return dob_; }
  const ResidualModel& residual() const { return residual_; }
  ResidualModel& residual() { return residual_; }
  double error_bound() const { return error_bound_; }
  void set_error_bound(double bound);
  Robustness robustness() const { return cbf_.robustness; }
  void set_robustness(Robustness r) { cbf_.robustness = r; }
  const ModelSnapshot& model() const { return model_; }

  // Oracle hooks: replace the kinematic parameters the filter reasons with
  // (plant-only terms included), and feed a disturbance in place of the
  // observer estimate.
  void set_model_params(const ModelParams& params);
  void set_disturbance_override(std::optional<Vec6> d) { override_ = std::move(d); }

 private:
  void init(const RunConfig& cfg);

  RobotKind kind_;
  ControlBox box_;
  ModelParams nominal_;
  ModelSnapshot model_;
  CbfConfig cbf_;
  DobConfig dob_cfg_;
  double error_bound_ = 0.0;
  bool use_cbf_ = false;
  bool use_dob_ = false;
  bool use_residual_ = false;
  Eigen::MatrixXd P_;

  DobState dob_;
  ResidualModel residual_;
  std::optional<Vec6> override_;
};

}  // namespace resdob
