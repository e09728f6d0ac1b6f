#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "resdob/cbf.hpp"
#include "resdob/disturbance.hpp"
#include "resdob/dynamics.hpp"

namespace resdob {

enum class TaskKind { kGoal, kArena };

struct TaskConfig {
  TaskKind task = TaskKind::kGoal;
  RobotKind robot = RobotKind::kPoint;
  int n_hazards = 4;
  double hazard_radius = 0.4;
  double hazard_speed = 0.1;
  double goal_radius = 0.3;
  double arena_half_width = 3.0;
  double robot_radius = 0.15;
  int episode_length = 400;
  double dt = 0.02;
  double goal_bonus = 1.0;
  double min_goal_distance = 1.0;
  WindSpec wind;
  double mismatch_factor = 1.5;
  ControlBox box;
  // Commute endpoints of the arena task.
  Vec2 endpoint_a{-1.5, -1.5};
  Vec2 endpoint_b{1.5, 1.5};

  void validate() const;
};

/// 6 m x 6 m region with four moving hazards.
TaskConfig goal1_task(RobotKind robot);
/// Same region with eight hazards.
TaskConfig goal2_task(RobotKind robot);
/// 4.2 m x 4.2 m walled arena, one static 0.8 m hazard at the center, commute
/// between two opposite corners.
TaskConfig arena_task(RobotKind robot = RobotKind::kCar);

struct Hazard {
  Vec2 position = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();
  double radius = 0.4;
};

struct StepInfo {
  double h_min = std::numeric_limits<double>::infinity();
  bool goal_reached = false;
  std::optional<double> commute_time;
};

struct StepOutcome {
  Eigen::VectorXd obs;
  double reward = 0.0;
  double cost = 0.0;
  bool done = false;
  StepInfo info;
};

inline constexpr int kObservedHazards = 4;

int observation_dim();

/// Simulated task with the perturbed plant and wind. One instance per rollout worker.
class Environment {
 public:
  explicit Environment(TaskConfig cfg);

  /// Samples a layout with every barrier strictly positive at the start.
  /// Throws std::runtime_error if 1000 attempts fail.
  Eigen::VectorXd reset(std::uint64_t seed);

  /// Applies u for one dt on the true plant. u is clamped to the box.
  StepOutcome step(const Vec2& u);

  /// Barriers at the current instant; obstacle centers are current positions,
  /// so evaluate them at relative time 0.
  std::vector<Barrier> barriers() const;
  double h_min() const;
  Eigen::VectorXd observe() const;

  const TaskConfig& config() const { return cfg_; }
  const State& state() const { return state_; }
  double time() const { return t_; }
  int step_count() const { return steps_; }
  const std::vector<Hazard>& hazards() const { return hazards_; }
  const Vec2& goal() const { return goal_; }
  const ModelParams& true_params() const { return true_params_; }
  Vec2 wind_now() const { return wind_at(cfg_.wind, t_); }

  /// Plant derivative at time t (used by oracle filters and calibration).
  StateDeriv plant_deriv(const State& x, const Vec2& u, double t) const;

  // Test hooks.
  void set_state(const State& x) { state_ = x; }
  void set_hazards(std::vector<Hazard> hazards) { hazards_ = std::move(hazards); }
  void set_goal(const Vec2& goal) { goal_ = goal; }

 private:
  bool sample_goal(std::mt19937_64& rng, int max_tries);
  void propagate_hazards(double dt);

  TaskConfig cfg_;
  ModelParams true_params_;
  State state_;
  double t_ = 0.0;
  int steps_ = 0;
  std::vector<Hazard> hazards_;
  Vec2 goal_ = Vec2::Zero();
  bool heading_to_b_ = true;
  double trip_start_ = 0.0;
  std::mt19937_64 rng_;
};

}  // namespace resdob
