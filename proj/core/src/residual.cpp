#include "resdob/residual.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

namespace resdob {

namespace {

nn::Mlp make_net(const std::vector<int>& hidden, int out, std::mt19937_64& rng) {
  std::vector<int> sizes;
  sizes.push_back(kResidualFeatureDim);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  nn::Mlp net = nn::make_glorot_mlp(sizes, rng);
  // Zero output layer: a fresh model predicts no residual.
  net.weights.back().setZero();
  net.biases.back().setZero();
  return net;
}

}  // namespace

ResidualModel make_residual_model(const ResidualConfig& cfg, std::uint64_t seed) {
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("residual learning rate must be > 0");
  std::mt19937_64 rng(seed);
  ResidualModel m;
  m.f_net = make_net(cfg.hidden, kStateDim, rng);
  m.g_net = make_net(cfg.hidden, kStateDim * kControlDim, rng);
  m.learning_rate = cfg.learning_rate;
  m.grad_clip = cfg.grad_clip;
  m.enabled = cfg.enabled;
  return m;
}

Eigen::VectorXd residual_features(const State& x) {
  Eigen::VectorXd f(kResidualFeatureDim);
  f << std::sin(x.theta_p), std::cos(x.theta_p), x.v_x, x.v_y, x.omega;
  return f;
}

Eigen::MatrixXd residual_feature_jacobian(const State& x) {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(kResidualFeatureDim, kStateDim);
  j(0, kTheta) = std::cos(x.theta_p);
  j(1, kTheta) = -std::sin(x.theta_p);
  j(2, kVx) = 1.0;
  j(3, kVy) = 1.0;
  j(4, kOmega) = 1.0;
  return j;
}

ControlAffine residual_terms(const ResidualModel& model, const State& x) {
  ControlAffine r;
  if (!model.enabled) return r;
  const Eigen::VectorXd feat = residual_features(x);
  r.drift = nn::forward(model.f_net, feat);
  const Eigen::VectorXd g = nn::forward(model.g_net, feat);
  for (int i = 0; i < kStateDim; ++i) {
    for (int j = 0; j < kControlDim; ++j) r.input(i, j) = g[i * kControlDim + j];
  }
  return r;
}

StateDeriv predict_residual(const ResidualModel& model, const State& x, const Vec2& u) {
  if (!model.enabled) return StateDeriv::Zero();
  return residual_terms(model, x).eval(u);
}

StateDeriv predict_residual(const ResidualModel& model, const State& x, const Control& u) {
  return predict_residual(model, x, to_vector(u));
}

Mat6 residual_drift_jacobian(const ResidualModel& model, const State& x) {
  if (!model.enabled) return Mat6::Zero();
  const Eigen::MatrixXd jf = nn::input_jacobian(model.f_net, residual_features(x));
  return jf * residual_feature_jacobian(x);
}

ResidualUpdate update_residual(ResidualModel& model, const State& x, const Vec2& u,
                               const StateDeriv& xdot_measured, const StateDeriv& nominal) {
  ResidualUpdate result;
  if (!model.enabled) return result;
  if (!x.finite() || !u.allFinite() || !xdot_measured.allFinite() || !nominal.allFinite()) {
    return result;
  }
  const Eigen::VectorXd feat = residual_features(x);
  const ControlAffine r = residual_terms(model, x);
  const Vec6 err = xdot_measured - nominal - r.eval(u);
  result.loss = 0.5 * err.squaredNorm();

  const Eigen::VectorXd f_out_grad = -err;
  Eigen::VectorXd g_out_grad(kStateDim * kControlDim);
  for (int i = 0; i < kStateDim; ++i) {
    for (int j = 0; j < kControlDim; ++j) g_out_grad[i * kControlDim + j] = -err[i] * u[j];
  }
  nn::Gradients gf = nn::backward(model.f_net, feat, f_out_grad);
  nn::Gradients gg = nn::backward(model.g_net, feat, g_out_grad);
  if (!gf.finite() || !gg.finite()) return result;

  const double norm = std::hypot(gf.parameter_norm(), gg.parameter_norm());
  if (model.grad_clip > 0.0 && norm > model.grad_clip) {
    const double s = model.grad_clip / norm;
    gf.scale_parameters(s);
    gg.scale_parameters(s);
    result.clipped = true;
  }
  model.f_net = nn::sgd_step(model.f_net, gf, model.learning_rate);
  model.g_net = nn::sgd_step(model.g_net, gg, model.learning_rate);
  result.applied = true;
  return result;
}

void save_residual(std::ostream& out, const ResidualModel& model) {
  out << "resdob-residual 1\n";
  out << std::hexfloat << "learning_rate " << model.learning_rate << "\ngrad_clip "
      << model.grad_clip << std::defaultfloat << "\nenabled " << (model.enabled ? 1 : 0) << '\n';
  nn::save_mlp(out, model.f_net);
  nn::save_mlp(out, model.g_net);
}

ResidualModel load_residual(std::istream& in) {
  std::string magic, key, lr, clip;
  int version = 0, enabled = 0;
  in >> magic >> version;
  if (!in || magic != "resdob-residual" || version != 1) {
    throw std::runtime_error("load_residual: bad header");
  }
  in >> key >> lr >> key >> clip >> key >> enabled;
  if (!in) throw std::runtime_error("load_residual: malformed settings");
  ResidualModel m;
  m.learning_rate = std::strtod(lr.c_str(), nullptr);
  m.grad_clip = std::strtod(clip.c_str(), nullptr);
  m.enabled = enabled != 0;
  m.f_net = nn::load_mlp(in);
  m.g_net = nn::load_mlp(in);
  return m;
}

}  // namespace resdob
