#include "resdob/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include "resdob/nn.hpp"
#include "resdob/qp_filter.hpp"

namespace resdob {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double rel_error(double a, double n) {
  const double scale = std::max(std::abs(a), std::abs(n));
  if (scale < 1e-10) return 0.0;  // both zero to within the difference noise
  return std::abs(a - n) / scale;
}

}  // namespace

GradcheckReport gradcheck(int nets, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> depth(1, 3);
  std::uniform_int_distribution<int> width(1, 32);
  std::uniform_int_distribution<int> io(1, 8);
  std::normal_distribution<double> normal(0.0, 1.0);
  constexpr double h = 1e-5;

  GradcheckReport rep;
  rep.nets = nets;
  for (int k = 0; k < nets; ++k) {
    std::vector<int> sizes{io(rng)};
    const int hidden = depth(rng);
    for (int l = 0; l < hidden; ++l) sizes.push_back(width(rng));
    sizes.push_back(io(rng));
    nn::Mlp net = nn::make_glorot_mlp(sizes, rng);
    for (auto& b : net.biases) {
      for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = 0.1 * normal(rng);
    }
    Eigen::VectorXd x(sizes.front());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = normal(rng);
    Eigen::VectorXd g(sizes.back());
    for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = normal(rng);

    auto loss = [&](const nn::Mlp& n, const Eigen::VectorXd& in) { return nn::forward(n, in).dot(g); };
    const nn::Gradients grads = nn::backward(net, x, g);

    const Eigen::VectorXd theta = nn::flatten_parameters(net);
    const Eigen::VectorXd analytic = nn::flatten_gradients(grads);
    nn::Mlp probe = net;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      Eigen::VectorXd tp = theta;
      tp[i] += h;
      nn::assign_parameters(probe, tp);
      const double fp = loss(probe, x);
      tp[i] = theta[i] - h;
      nn::assign_parameters(probe, tp);
      const double fm = loss(probe, x);
      rep.max_rel_error = std::max(rep.max_rel_error, rel_error(analytic[i], (fp - fm) / (2.0 * h)));
      ++rep.entries_checked;
    }
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Eigen::VectorXd xp = x;
      xp[i] += h;
      const double fp = loss(net, xp);
      xp[i] = x[i] - h;
      const double fm = loss(net, xp);
      rep.max_rel_error = std::max(rep.max_rel_error, rel_error(grads.input(i, 0), (fp - fm) / (2.0 * h)));
      ++rep.entries_checked;
    }
  }
  rep.passed = rep.max_rel_error <= rep.tolerance;
  rep.seconds = seconds_since(t0);
  return rep;
}

QpCheckReport qp_check(int instances, std::uint64_t seed, int grid) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_int_distribution<int> count(0, 6);
  std::normal_distribution<double> normal(0.0, 1.0);

  QpCheckReport rep;
  rep.instances = instances;
  rep.grid = grid;
  rep.min_residual = std::numeric_limits<double>::infinity();
  rep.max_objective_excess = -std::numeric_limits<double>::infinity();
  const Eigen::VectorXd lower = Eigen::Vector2d(-1.0, -1.0);
  const Eigen::VectorXd upper = Eigen::Vector2d(1.0, 1.0);
  bool ok = true;

  for (int k = 0; k < instances; ++k) {
    Eigen::Matrix2d A;
    A << normal(rng), normal(rng), normal(rng), normal(rng);
    const Eigen::Matrix2d P = A * A.transpose() + 0.1 * Eigen::Matrix2d::Identity();
    const Eigen::Vector2d u_rl(2.0 * unit(rng), 2.0 * unit(rng));
    // Every barrier keeps a random anchor point of the box feasible.
    const Eigen::Vector2d anchor(unit(rng), unit(rng));
    std::vector<BarrierConstraint> cons;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      BarrierConstraint c;
      c.coeff = Eigen::Vector2d(normal(rng), normal(rng));
      c.rhs = -c.coeff.dot(anchor) + 0.5 * std::abs(normal(rng));
      cons.push_back(c);
    }
    const FilterResult r = solve(FilterProblem::make(P, u_rl, cons, lower, upper));
    if (r.slack_used > 0.0) ++rep.slack_instances;
    for (const auto& c : cons) rep.min_residual = std::min(rep.min_residual, c.coeff.dot(r.u_safe) + c.rhs);

    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid; ++i) {
      const double u0 = -1.0 + 2.0 * i / (grid - 1);
      for (int j = 0; j < grid; ++j) {
        const Eigen::Vector2d u(u0, -1.0 + 2.0 * j / (grid - 1));
        bool feasible = true;
        for (const auto& c : cons) {
          if (c.coeff.dot(u) + c.rhs < 0.0) {
            feasible = false;
            break;
          }
        }
        if (!feasible) continue;
        const Eigen::Vector2d du = u - u_rl;
        best = std::min(best, 0.5 * du.dot(P * du));
      }
    }
    const Eigen::Vector2d du = r.u_safe - u_rl;
    const double obj = 0.5 * du.dot(P * du);
    if (std::isfinite(best)) {
      rep.max_objective_excess = std::max(rep.max_objective_excess, obj - best);
      if (obj > best + 1e-12 * (1.0 + std::abs(best))) ok = false;
    }
  }
  if (rep.min_residual < -1e-8 || rep.slack_instances > 0) ok = false;

  // Half-plane projection with P = I and a non-binding box.
  const int cases = std::max(1, instances);
  for (int k = 0; k < cases; ++k) {
    const Eigen::Vector2d u_rl(0.3 * unit(rng), 0.3 * unit(rng));
    BarrierConstraint c;
    c.coeff = Eigen::Vector2d(normal(rng), normal(rng)).normalized() * (0.5 + std::abs(normal(rng)));
    const double violation = 0.05 + 0.2 * std::abs(unit(rng)) * c.coeff.norm();
    c.rhs = -c.coeff.dot(u_rl) - violation;
    const Eigen::Vector2d expected = u_rl - ((c.coeff.dot(u_rl) + c.rhs) / c.coeff.squaredNorm()) * c.coeff;
    if ((expected.array().abs() >= 1.0).any()) continue;
    const FilterResult r =
        solve(FilterProblem::make(Eigen::Matrix2d::Identity(), u_rl, {c}, lower, upper));
    rep.projection_max_error = std::max(rep.projection_max_error, (r.u_safe - expected).norm());
    ++rep.projection_cases;
  }
  if (rep.projection_max_error > 1e-10 || rep.projection_cases == 0) ok = false;

  rep.passed = ok;
  rep.seconds = seconds_since(t0);
  return rep;
}

}  // namespace resdob
