// resdob command line: training, evaluation, plots and self-checks.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "resdob/checks.hpp"
#include "resdob/config.hpp"
#include "resdob/plot.hpp"
#include "resdob/run_log.hpp"
#include "resdob/train.hpp"

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "configuration file (key = value lines)");
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--mode", c.mode, "none | cbf | dob_cbf | res_cbf | res_dob_cbf");
  cmd->add_option("--out", c.out, "output directory");
}

resdob::RunConfig resolve(const Common& c) {
  resdob::RunConfig cfg = c.config_path.empty() ? resdob::RunConfig{} : resdob::load_config(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.mode.empty()) cfg.mode = resdob::parse_filter_mode(c.mode);
  if (!c.out.empty()) cfg.out_dir = c.out;
  cfg.validate();
  return cfg;
}

int run_train(const Common& c, std::optional<int> iterations, bool quiet) {
  resdob::RunConfig cfg = resolve(c);
  if (iterations) cfg.iterations = *iterations;
  if (cfg.out_dir.empty()) cfg.out_dir = "runs/" + std::string(resdob::to_string(cfg.mode)) + "_s" +
                                         std::to_string(cfg.seed);
  resdob::TrainHooks hooks;
  if (!quiet) {
    hooks.on_iteration = [](const resdob::IterationRecord& r) {
      std::printf("iter %4d  reward %8.3f  cost %7.2f  violations %5lld  slack %4lld  interv %.3f  lambda %.3f\n",
                  r.iteration, r.mean_episode_reward, r.mean_episode_cost, r.violations,
                  r.slack_events, r.intervention_rate, r.lambda);
      std::fflush(stdout);
    };
  }
  const resdob::TrainResult res = resdob::train(cfg, hooks);
  resdob::save_run(cfg.out_dir, cfg, res);
  if (!res.ok()) {
    std::fprintf(stderr, "resdob train: aborted at iteration %d: %s\n", *res.log.aborted_iteration,
                 res.log.error.c_str());
    return 2;
  }
  std::printf("wrote %s (error bound %.6g)\n", cfg.out_dir.c_str(), res.error_bound);
  return 0;
}

int run_eval(const Common& c, const std::string& checkpoint, int episodes) {
  resdob::Checkpoint ck = resdob::load_checkpoint(checkpoint);
  resdob::RunConfig cfg = c.config_path.empty() ? ck.config : resdob::load_config(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.mode.empty()) cfg.mode = resdob::parse_filter_mode(c.mode);
  if (episodes < 0) episodes = cfg.eval_episodes;
  const resdob::EvalSummary s = resdob::evaluate(ck.policy, ck.residual, cfg, episodes, cfg.seed);
  std::printf("episodes %d\nmean_reward %.6g\nmean_cost %.6g\nviolations %lld\n"
              "violations_per_episode %.6g\nslack_events %lld\n",
              s.episodes, s.mean_reward, s.mean_cost, s.violations, s.violations_per_episode,
              s.slack_events);
  if (cfg.task.task == resdob::TaskKind::kArena) {
    std::printf("trips_completed %d\n", s.trips_completed);
    if (s.mean_commute_time) std::printf("mean_commute_time %.6g\n", *s.mean_commute_time);
    else std::printf("mean_commute_time n/a\n");
  }
  return 0;
}

int run_plot(const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<resdob::RunLog> logs;
  for (const std::string& in : inputs) {
    fs::path p(in);
    if (fs::is_directory(p)) p /= "runlog.jsonl";
    std::ifstream f(p);
    if (!f) throw std::runtime_error("cannot open run log '" + p.string() + "'");
    logs.push_back(resdob::read_jsonl(f));
  }
  for (const auto& path : resdob::plot_logs(logs, out.empty() ? "." : out)) {
    std::printf("wrote %s\n", path.c_str());
  }
  return 0;
}

int run_calibrate(const Common& c) {
  const resdob::RunConfig cfg = resolve(c);
  const resdob::Calibration cal = resdob::calibrate_error_bound(cfg);
  std::printf("mode %s\nsamples %d\nquantile %.3g\nerror_bound %.6g\nmean_error %.6g\nmax_error %.6g\n"
              "max_position_estimate %.3g\n",
              std::string(resdob::to_string(cfg.mode)).c_str(), cal.samples, cal.quantile, cal.bound,
              cal.mean_error, cal.max_error, cal.max_position_estimate);
  if (cal.max_position_estimate > 1e-3) {
    std::fprintf(stderr, "resdob calibrate-dob: position-channel estimate %.3g exceeds 1e-3\n",
                 cal.max_position_estimate);
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"resdob: safe reinforcement learning with a disturbance-observer CBF filter"};
  app.require_subcommand(1);

  Common train_opts;
  std::optional<int> iterations;
  bool quiet = false;
  auto* train = app.add_subcommand("train", "train a policy and write its run directory");
  add_common(train, train_opts);
  train->add_option("--iterations", iterations, "override run.iterations");
  train->add_flag("--quiet", quiet, "no per-iteration output");

  Common eval_opts;
  std::string checkpoint;
  int episodes = -1;
  auto* eval = app.add_subcommand("eval", "evaluate a trained run with the mean action");
  add_common(eval, eval_opts);
  eval->add_option("--checkpoint", checkpoint, "run directory written by train")->required();
  eval->add_option("--episodes", episodes, "evaluation episodes (default run.eval_episodes)");

  std::vector<std::string> plot_inputs;
  std::string plot_out;
  auto* plot = app.add_subcommand("plot", "render reward and cost curves as SVG");
  plot->add_option("logs", plot_inputs, "runlog.jsonl files or run directories")->required();
  plot->add_option("--out", plot_out, "output directory");

  Common cal_opts;
  auto* cal = app.add_subcommand("calibrate-dob", "estimate the observer error bound");
  add_common(cal, cal_opts);

  int qp_instances = 100;
  std::uint64_t qp_seed = 0;
  int qp_grid = 401;
  auto* qp = app.add_subcommand("qp-check", "compare the filter QP with a grid oracle");
  qp->add_option("--instances", qp_instances, "random instances");
  qp->add_option("--seed", qp_seed, "seed");
  qp->add_option("--grid", qp_grid, "grid points per axis");

  int gc_nets = 50;
  std::uint64_t gc_seed = 0;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of network gradients");
  gc->add_option("--nets", gc_nets, "random networks");
  gc->add_option("--seed", gc_seed, "seed");

  std::string defaults_out;
  auto* defaults = app.add_subcommand("defaults", "print the configuration reference");
  defaults->add_option("--out", defaults_out, "write to a file instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return run_train(train_opts, iterations, quiet);
    if (*eval) return run_eval(eval_opts, checkpoint, episodes);
    if (*plot) return run_plot(plot_inputs, plot_out);
    if (*cal) return run_calibrate(cal_opts);
    if (*qp) {
      const resdob::QpCheckReport r = resdob::qp_check(qp_instances, qp_seed, qp_grid);
      std::printf("instances %d\nmax_objective_excess %.3g\nmin_residual %.3g\nslack_instances %d\n"
                  "projection_cases %d\nprojection_max_error %.3g\nseconds %.2f\n%s\n",
                  r.instances, r.max_objective_excess, r.min_residual, r.slack_instances,
                  r.projection_cases, r.projection_max_error, r.seconds, r.passed ? "PASS" : "FAIL");
      if (!r.passed) {
        std::fprintf(stderr, "resdob qp-check: solver disagrees with the oracle\n");
        return 1;
      }
      return 0;
    }
    if (*gc) {
      const resdob::GradcheckReport r = resdob::gradcheck(gc_nets, gc_seed);
      std::printf("nets %d\nentries %lld\nmax_rel_error %.3g\ntolerance %.1g\nseconds %.2f\n%s\n", r.nets,
                  r.entries_checked, r.max_rel_error, r.tolerance, r.seconds, r.passed ? "PASS" : "FAIL");
      if (!r.passed) {
        std::fprintf(stderr, "resdob gradcheck: max relative error %.3g above %.1g\n", r.max_rel_error,
                     r.tolerance);
        return 1;
      }
      return 0;
    }
    if (*defaults) {
      if (defaults_out.empty()) {
        std::cout << resdob::defaults_reference();
      } else {
        std::ofstream f(defaults_out);
        if (!f) throw std::runtime_error("cannot write '" + defaults_out + "'");
        f << resdob::defaults_reference();
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "resdob: error: %s\n", e.what());
    return 1;
  }
  return 0;
}
