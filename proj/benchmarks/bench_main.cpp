#include <benchmark/benchmark.h>

#include <random>

#include "resdob/env.hpp"
#include "resdob/nn.hpp"
#include "resdob/qp_filter.hpp"
#include "resdob/safety_layer.hpp"

using namespace resdob;

namespace {

std::vector<BarrierConstraint> random_constraints(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::vector<BarrierConstraint> out(n);
  for (auto& c : out) {
    c.coeff = Eigen::Vector2d(normal(rng), normal(rng));
    c.rhs = normal(rng);
  }
  return out;
}

void BM_QpSolve(benchmark::State& state) {
  std::mt19937_64 rng(7);
  const auto cons = random_constraints(static_cast<int>(state.range(0)), rng);
  const FilterProblem p = FilterProblem::make(Eigen::Matrix2d::Identity(), Eigen::Vector2d(0.4, -0.2), cons,
                                              -Eigen::Vector2d::Ones(), Eigen::Vector2d::Ones());
  for (auto _ : state) benchmark::DoNotOptimize(solve(p));
}
BENCHMARK(BM_QpSolve)->Arg(1)->Arg(3)->Arg(6);

void BM_MlpForward(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const nn::Mlp net = nn::make_glorot_mlp({12, 64, 64, 4}, rng);
  const Eigen::VectorXd x = Eigen::VectorXd::Random(12);
  for (auto _ : state) benchmark::DoNotOptimize(nn::forward(net, x));
}
BENCHMARK(BM_MlpForward);

void BM_MlpBackward(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const nn::Mlp net = nn::make_glorot_mlp({12, 64, 64, 4}, rng);
  const Eigen::VectorXd x = Eigen::VectorXd::Random(12);
  const Eigen::VectorXd g = Eigen::VectorXd::Ones(4);
  for (auto _ : state) benchmark::DoNotOptimize(nn::backward(net, x, g));
}
BENCHMARK(BM_MlpBackward);

void BM_FilterStep(benchmark::State& state) {
  RunConfig cfg = default_config("goal1", RobotKind::kPoint);
  cfg.mode = FilterMode::kResDobCbf;
  Environment env(cfg.task);
  env.reset(1);
  SafetyLayer layer(cfg, 1);
  layer.reset(env.state(), env.time());
  const Vec2 u(0.5, 0.1);
  for (auto _ : state) {
    const State x = env.state();
    const auto dec = layer.filter(x, env.time(), env.barriers(), u);
    const auto out = env.step(dec.u_safe);
    layer.observe(x, dec.u_safe, env.state(), cfg.task.dt);
    if (out.done) {
      env.reset(1);
      layer.reset(env.state(), env.time());
    }
  }
}
BENCHMARK(BM_FilterStep);

}  // namespace

BENCHMARK_MAIN();
