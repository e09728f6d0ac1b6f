#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "resdob/config.hpp"
#include "resdob/residual.hpp"
#include "resdob/rl.hpp"
#include "resdob/run_log.hpp"

namespace resdob {

/// Empirical DOB error bound: a quantile of |d_hat - d| over the second half of
/// a rollout under the initial exploration noise, with the mode's observer
/// and residual learner running and no barrier filtering.
struct Calibration {
  double bound = 0.0;
  double quantile = 0.99;
  int samples = 0;
  double mean_error = 0.0;
  double max_error = 0.0;
  double max_position_estimate = 0.0;  // max |d_hat| on the x_p, y_p channels
};

Calibration calibrate_error_bound(const RunConfig& cfg);

struct TrainResult {
  RunLog log;
  rl::PolicyState policy;
  ResidualModel residual;
  double error_bound = 0.0;

  bool ok() const { return !log.aborted_iteration.has_value(); }
};

struct TrainHooks {
  std::function<void(const IterationRecord&)> on_iteration;
};

/// Collects cfg.episodes_per_iteration episodes per iteration through the
/// safety layer and performs one PPO-Lagrangian update. A module error stops
/// the run and is recorded in the log.
TrainResult train(const RunConfig& cfg, const TrainHooks& hooks = {});

/// Independent runs on up to `workers` threads (0 = hardware concurrency).
/// Results come back in input order and match sequential train() exactly.
std::vector<TrainResult> train_many(const std::vector<RunConfig>& cfgs, int workers = 0);

/// Writes runlog.jsonl, runlog.csv, timing.csv, config.txt (with the resolved
/// error bound), policy.ckpt and residual.ckpt into dir.
void save_run(const std::string& dir, const RunConfig& cfg, const TrainResult& result);

struct Checkpoint {
  RunConfig config;
  rl::PolicyState policy;
  ResidualModel residual;
};

/// Reads a directory written by save_run. Throws std::invalid_argument when
/// the networks do not fit the stored configuration.
Checkpoint load_checkpoint(const std::string& dir);

struct EvalSummary {
  int episodes = 0;
  double mean_reward = 0.0;
  double mean_cost = 0.0;
  long long violations = 0;
  double violations_per_episode = 0.0;
  long long slack_events = 0;
  int trips_completed = 0;                 // arena task
  std::optional<double> mean_commute_time; // arena task, completed trips only
  std::vector<double> commute_times;
};

/// Runs the mean action (std = 0) through the filter. On the arena task every
/// episode is one trip attempt that ends when the far endpoint is reached.
/// The residual keeps learning online on a private copy.
EvalSummary evaluate(const rl::PolicyState& policy, const ResidualModel& residual,
                     const RunConfig& cfg, int episodes, std::uint64_t seed);

}  // namespace resdob
