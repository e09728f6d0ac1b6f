#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "resdob/dynamics.hpp"
#include "resdob/nn.hpp"

namespace resdob {

struct ResidualConfig {
  std::vector<int> hidden{32, 32};
  double learning_rate = 0.01;
  double grad_clip = 10.0;
  bool enabled = true;
};

/// Learned correction xdot ~ nominal + df(x) + dg(x) u.
///
/// Both nets read the position-free features (sin theta, cos theta, v_x, v_y,
/// omega). f_net outputs the 6-vector df; g_net outputs dg as a row-major 6x2
/// matrix (entry (i, j) at index 2 i + j).
struct ResidualModel {
  nn::Mlp f_net;
  nn::Mlp g_net;
  double learning_rate = 0.01;
  double grad_clip = 10.0;
  bool enabled = true;
};

inline constexpr int kResidualFeatureDim = 5;

ResidualModel make_residual_model(const ResidualConfig& cfg, std::uint64_t seed);

Eigen::VectorXd residual_features(const State& x);
/// d features / d state, kResidualFeatureDim x 6.
Eigen::MatrixXd residual_feature_jacobian(const State& x);

/// df(x) and dg(x); zero when the model is disabled.
ControlAffine residual_terms(const ResidualModel& model, const State& x);

/// df(x) + dg(x) u.
StateDeriv predict_residual(const ResidualModel& model, const State& x, const Vec2& u);
StateDeriv predict_residual(const ResidualModel& model, const State& x, const Control& u);

/// d(df)/dx through the exact input gradients of f_net.
Mat6 residual_drift_jacobian(const ResidualModel& model, const State& x);

struct ResidualUpdate {
  double loss = 0.0;     // 0.5 |e|^2 before the step
  bool applied = false;  // false when skipped (disabled or non-finite data)
  bool clipped = false;
};

/// One SGD step on 0.5 |xdot_measured - nominal - df - dg u|^2 for both nets.
ResidualUpdate update_residual(ResidualModel& model, const State& x, const Vec2& u,
                               const StateDeriv& xdot_measured, const StateDeriv& nominal);

void save_residual(std::ostream& out, const ResidualModel& model);
ResidualModel load_residual(std::istream& in);

}  // namespace resdob
