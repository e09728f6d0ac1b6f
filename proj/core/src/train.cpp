#include "resdob/train.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "resdob/env.hpp"
#include "resdob/safety_layer.hpp"

namespace resdob {

namespace {

std::string task_label(const RunConfig& cfg) {
  return cfg.task_name + "/" + (cfg.task.robot == RobotKind::kPoint ? "point" : "car");
}

void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  body(out);
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace

Calibration calibrate_error_bound(const RunConfig& cfg) {
  cfg.validate();
  const std::uint64_t master = derive_seed(cfg.seed, seed_stream::kCalibration);
  Environment env(cfg.task);
  SafetyLayer layer(cfg, derive_seed(master, 1));
  std::mt19937_64 noise(derive_seed(master, 2));
  std::normal_distribution<double> normal(0.0, std::exp(cfg.ppo.init_log_std));

  std::vector<double> errors;
  Calibration cal;
  cal.quantile = cfg.error_bound_quantile;
  const int warmup = cfg.calibration_steps / 2;
  std::uint64_t episode = 0;
  for (int k = 0; k < cfg.calibration_steps; ++k) {
    if (k == 0 || env.step_count() >= cfg.task.episode_length) {
      env.reset(derive_seed(master, 100 + episode++));
      layer.reset(env.state(), env.time());
    }
    Eigen::VectorXd z(kControlDim);
    z << normal(noise), normal(noise);
    const Vec2 u = rl::squash(cfg.task.box, z);
    const State x = env.state();
    const double t = env.time();
    layer.filter(x, t, {}, u);
    const Vec6 d_true = env.plant_deriv(x, u, t) - layer.model_deriv(x, u);
    const Vec6 d_hat = layer.disturbance_estimate();
    if (env.step_count() > 0) {
      cal.max_position_estimate =
          std::max({cal.max_position_estimate, std::abs(d_hat[kXp]), std::abs(d_hat[kYp])});
    }
    if (k >= warmup) errors.push_back((d_hat - d_true).norm());
    env.step(u);
    layer.observe(x, u, env.state(), cfg.task.dt);
  }
  cal.samples = static_cast<int>(errors.size());
  if (!errors.empty()) {
    std::vector<double> sorted = errors;
    std::sort(sorted.begin(), sorted.end());
    const auto idx = static_cast<std::size_t>(
        std::ceil(cfg.error_bound_quantile * static_cast<double>(sorted.size())) - 1.0);
    cal.bound = sorted[std::min(idx, sorted.size() - 1)];
    cal.max_error = sorted.back();
    double sum = 0.0;
    for (double e : errors) sum += e;
    cal.mean_error = sum / static_cast<double>(errors.size());
  }
  return cal;
}

TrainResult train(const RunConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();

  TrainResult result;
  result.log.mode = std::string(to_string(cfg.mode));
  result.log.task = task_label(cfg);
  result.log.seed = cfg.seed;

  Environment env(cfg.task);
  const int obs_dim = observation_dim();
  result.policy = rl::make_policy(obs_dim, cfg.task.box, cfg.ppo, derive_seed(cfg.seed, seed_stream::kPolicy));
  SafetyLayer layer(cfg, derive_seed(cfg.seed, seed_stream::kResidual));

  result.error_bound = cfg.dob.error_bound;
  if (layer.robustness() == Robustness::kDobPlusBound && cfg.error_bound_auto) {
    result.error_bound = calibrate_error_bound(cfg).bound;
  }
  layer.set_error_bound(result.error_bound);

  std::mt19937_64 action_rng(derive_seed(cfg.seed, seed_stream::kEnv));
  std::mt19937_64 update_rng(derive_seed(cfg.seed, seed_stream::kPolicy) ^ 0x5bd1e995ULL);
  const std::uint64_t layout_master = derive_seed(cfg.seed, seed_stream::kLayout);
  std::uint64_t episode_index = 0;

  rl::RolloutBuffer buffer;
  for (int it = 0; it < cfg.iterations; ++it) {
    try {
      buffer.clear();
      IterationRecord rec;
      rec.iteration = it;
      long long steps = 0;
      long long intervened = 0;
      long long dob_samples = 0;
      long long residual_samples = 0;
      double dob_error_sum = 0.0;
      double residual_loss_sum = 0.0;

      for (int ep = 0; ep < cfg.episodes_per_iteration; ++ep) {
        Eigen::VectorXd obs = env.reset(derive_seed(layout_master, episode_index++));
        layer.reset(env.state(), env.time());
        double ep_reward = 0.0;
        double ep_cost = 0.0;
        double v = rl::value(result.policy.value_net, obs);
        double vc = rl::value(result.policy.cost_value_net, obs);
        bool done = false;
        while (!done) {
          const rl::Action a = rl::act(result.policy, obs, action_rng);
          const State x = env.state();
          const double t = env.time();
          const SafetyLayer::Decision dec = layer.filter(x, t, env.barriers(), a.u);
          const Vec2 u = dec.u_safe;
          if (cfg.dob_active()) {
            const Vec6 d_true = env.plant_deriv(x, u, t) - layer.model_deriv(x, u);
            dob_error_sum += (layer.disturbance_estimate() - d_true).norm();
            ++dob_samples;
          }

          const StepOutcome out = env.step(u);
          const double loss = layer.observe(x, u, env.state(), cfg.task.dt);
          if (cfg.residual_active()) {
            residual_loss_sum += loss;
            ++residual_samples;
          }

          rl::Transition tr;
          tr.obs = obs;
          tr.u_rl = a.u;
          tr.u_safe = u;
          tr.reward = out.reward;
          tr.cost = out.cost;
          tr.log_prob = (u == a.u) ? a.log_prob : rl::log_prob(result.policy, obs, u);
          tr.done = out.done;
          tr.value = v;
          tr.cost_value = vc;
          tr.next_value = rl::value(result.policy.value_net, out.obs);
          tr.next_cost_value = rl::value(result.policy.cost_value_net, out.obs);
          buffer.transitions.push_back(std::move(tr));

          ++steps;
          if (dec.qp.intervened) ++intervened;
          if (dec.qp.slack_used > 0.0) ++rec.slack_events;
          if (out.cost > 0.0) ++rec.violations;
          ep_reward += out.reward;
          ep_cost += out.cost;
          v = buffer.transitions.back().next_value;
          vc = buffer.transitions.back().next_cost_value;
          obs = out.obs;
          done = out.done;
        }
        buffer.episode_rewards.push_back(ep_reward);
        buffer.episode_costs.push_back(ep_cost);
      }

      rl::compute_advantages(buffer, cfg.ppo.gamma, cfg.ppo.gae_lambda);
      const rl::UpdateStats stats = rl::update(result.policy, buffer, cfg.ppo, update_rng);
      if (stats.skipped) throw std::runtime_error("policy update produced non-finite values");

      rec.mean_episode_reward = buffer.mean_episode_reward();
      rec.mean_episode_cost = buffer.mean_episode_cost();
      rec.intervention_rate = steps > 0 ? static_cast<double>(intervened) / static_cast<double>(steps) : 0.0;
      rec.dob_error_estimate = dob_samples > 0 ? dob_error_sum / static_cast<double>(dob_samples) : 0.0;
      rec.residual_loss =
          residual_samples > 0 ? residual_loss_sum / static_cast<double>(residual_samples) : 0.0;
      rec.lambda = result.policy.lambda;
      rec.wall_time =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      result.log.append(rec);
      if (hooks.on_iteration) hooks.on_iteration(rec);
    } catch (const std::exception& e) {
      result.log.aborted_iteration = it;
      result.log.error = e.what();
      break;
    }
  }
  result.residual = layer.residual();
  return result;
}

std::vector<TrainResult> train_many(const std::vector<RunConfig>& cfgs, int workers) {
  std::vector<TrainResult> out(cfgs.size());
  if (workers <= 0) workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min<int>(workers, static_cast<int>(cfgs.size()));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < cfgs.size(); i = next++) out[i] = train(cfgs[i]);
  };
  if (workers <= 1) {
    work();
    return out;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  return out;
}

void save_run(const std::string& dir, const RunConfig& cfg, const TrainResult& result) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  fs::create_directories(root);
  RunConfig resolved = cfg;
  resolved.error_bound_auto = false;
  resolved.dob.error_bound = result.error_bound;
  write_file(root / "config.txt", [&](std::ostream& o) { write_config(o, resolved); });
  write_file(root / "runlog.jsonl", [&](std::ostream& o) { write_jsonl(o, result.log); });
  write_file(root / "runlog.csv", [&](std::ostream& o) { write_csv(o, result.log); });
  write_file(root / "timing.csv", [&](std::ostream& o) { write_timing_csv(o, result.log); });
  write_file(root / "policy.ckpt", [&](std::ostream& o) { rl::save_policy(o, result.policy); });
  write_file(root / "residual.ckpt", [&](std::ostream& o) { save_residual(o, result.residual); });
}

Checkpoint load_checkpoint(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  Checkpoint ck;
  ck.config = load_config((root / "config.txt").string());
  {
    std::ifstream in(root / "policy.ckpt");
    if (!in) throw std::runtime_error("cannot open '" + (root / "policy.ckpt").string() + "'");
    ck.policy = rl::load_policy(in, ck.config.ppo);
  }
  {
    std::ifstream in(root / "residual.ckpt");
    if (!in) throw std::runtime_error("cannot open '" + (root / "residual.ckpt").string() + "'");
    ck.residual = load_residual(in);
  }
  if (ck.policy.policy_net.input_dim() != observation_dim()) {
    throw std::invalid_argument("checkpoint policy expects " +
                                std::to_string(ck.policy.policy_net.input_dim()) +
                                " observations, task provides " + std::to_string(observation_dim()));
  }
  return ck;
}

EvalSummary evaluate(const rl::PolicyState& policy, const ResidualModel& residual,
                     const RunConfig& cfg, int episodes, std::uint64_t seed) {
  cfg.validate();
  if (episodes < 0) throw std::invalid_argument("evaluate: episodes must be >= 0");
  if (policy.policy_net.input_dim() != observation_dim()) {
    throw std::invalid_argument("evaluate: checkpoint incompatible with the task observation size");
  }
  if ((policy.box.lower - cfg.task.box.lower).norm() > 0.0 ||
      (policy.box.upper - cfg.task.box.upper).norm() > 0.0) {
    throw std::invalid_argument("evaluate: checkpoint control box differs from the task box");
  }
  EvalSummary s;
  s.episodes = episodes;
  if (episodes == 0) return s;

  Environment env(cfg.task);
  SafetyLayer layer(cfg, residual);
  layer.set_error_bound(cfg.dob.error_bound);
  std::mt19937_64 unused_rng(0);
  const std::uint64_t master = derive_seed(seed, seed_stream::kEval);
  const bool arena = cfg.task.task == TaskKind::kArena;

  double reward_sum = 0.0;
  double cost_sum = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    Eigen::VectorXd obs = env.reset(derive_seed(master, static_cast<std::uint64_t>(ep)));
    layer.reset(env.state(), env.time());
    bool done = false;
    while (!done) {
      const rl::Action a = rl::act(policy, obs, unused_rng, /*deterministic=*/true);
      const State x = env.state();
      const SafetyLayer::Decision dec = layer.filter(x, env.time(), env.barriers(), a.u);
      const StepOutcome out = env.step(dec.u_safe);
      layer.observe(x, dec.u_safe, env.state(), cfg.task.dt);
      reward_sum += out.reward;
      cost_sum += out.cost;
      if (out.cost > 0.0) ++s.violations;
      if (dec.qp.slack_used > 0.0) ++s.slack_events;
      obs = out.obs;
      done = out.done;
      if (arena && out.info.commute_time) {
        s.commute_times.push_back(*out.info.commute_time);
        done = true;
      }
    }
  }
  s.mean_reward = reward_sum / episodes;
  s.mean_cost = cost_sum / episodes;
  s.violations_per_episode = static_cast<double>(s.violations) / episodes;
  s.trips_completed = static_cast<int>(s.commute_times.size());
  if (!s.commute_times.empty()) {
    double sum = 0.0;
    for (double c : s.commute_times) sum += c;
    s.mean_commute_time = sum / static_cast<double>(s.commute_times.size());
  }
  return s;
}

}  // namespace resdob
