#include "resdob/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace resdob {

namespace {

constexpr int kMaxLayoutTries = 1000;
constexpr double kStartClearance = 0.2;

Vec2 to_body(const Vec2& v, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {c * v.x() + s * v.y(), -s * v.x() + c * v.y()};
}

}  // namespace

void TaskConfig::validate() const {
  if (episode_length <= 0) throw std::invalid_argument("episode_length must be > 0");
  if (!(hazard_radius > 0.0 && goal_radius > 0.0 && robot_radius > 0.0)) {
    throw std::invalid_argument("radii must be > 0");
  }
  if (!(arena_half_width > 0.0)) throw std::invalid_argument("arena_half_width must be > 0");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
  if (n_hazards < 0) throw std::invalid_argument("n_hazards must be >= 0");
  if (!(hazard_speed >= 0.0)) throw std::invalid_argument("hazard_speed must be >= 0");
  if (!(mismatch_factor > 0.0)) throw std::invalid_argument("mismatch_factor must be > 0");
  if (!((box.upper - box.lower).array() > 0.0).all()) {
    throw std::invalid_argument("control box lower must be < upper");
  }
  wind.validate();
}

TaskConfig goal1_task(RobotKind robot) {
  TaskConfig c;
  c.task = TaskKind::kGoal;
  c.robot = robot;
  c.n_hazards = 4;
  c.wind = default_wind(robot);
  return c;
}

TaskConfig goal2_task(RobotKind robot) {
  TaskConfig c = goal1_task(robot);
  c.n_hazards = 8;
  return c;
}

TaskConfig arena_task(RobotKind robot) {
  TaskConfig c;
  c.task = TaskKind::kArena;
  c.robot = robot;
  c.n_hazards = 1;
  c.hazard_radius = 0.8;
  c.hazard_speed = 0.0;
  c.arena_half_width = 2.1;
  c.goal_radius = 0.3;
  c.wind = default_wind(robot);
  return c;
}

int observation_dim() { return 5 + 2 + 2 + 4 * kObservedHazards; }

Environment::Environment(TaskConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  true_params_ = default_true_params(cfg_.robot, cfg_.mismatch_factor);
}

Eigen::VectorXd Environment::reset(std::uint64_t seed) {
  rng_.seed(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double hw = cfg_.arena_half_width;
  const double two_pi = 2.0 * std::numbers::pi;

  for (int attempt = 0; attempt < kMaxLayoutTries; ++attempt) {
    state_ = State{};
    t_ = 0.0;
    steps_ = 0;
    trip_start_ = 0.0;
    heading_to_b_ = true;
    hazards_.clear();

    if (cfg_.task == TaskKind::kArena) {
      state_.x_p = cfg_.endpoint_a.x();
      state_.y_p = cfg_.endpoint_a.y();
      state_.theta_p = two_pi * unit(rng_) - std::numbers::pi;
      goal_ = cfg_.endpoint_b;
      for (int i = 0; i < cfg_.n_hazards; ++i) {
        Hazard hz;
        hz.radius = cfg_.hazard_radius;
        if (i > 0) {
          hz.position = Vec2((2.0 * unit(rng_) - 1.0) * (hw - hz.radius),
                             (2.0 * unit(rng_) - 1.0) * (hw - hz.radius));
        }
        const double ang = two_pi * unit(rng_);
        hz.velocity = cfg_.hazard_speed * Vec2(std::cos(ang), std::sin(ang));
        hazards_.push_back(hz);
      }
    } else {
      const double margin = 0.5;
      state_.x_p = (2.0 * unit(rng_) - 1.0) * (hw - margin);
      state_.y_p = (2.0 * unit(rng_) - 1.0) * (hw - margin);
      state_.theta_p = two_pi * unit(rng_) - std::numbers::pi;
      for (int i = 0; i < cfg_.n_hazards; ++i) {
        Hazard hz;
        hz.radius = cfg_.hazard_radius;
        hz.position = Vec2((2.0 * unit(rng_) - 1.0) * (hw - hz.radius),
                           (2.0 * unit(rng_) - 1.0) * (hw - hz.radius));
        const double ang = two_pi * unit(rng_);
        hz.velocity = cfg_.hazard_speed * Vec2(std::cos(ang), std::sin(ang));
        hazards_.push_back(hz);
      }
    }

    bool ok = true;
    for (const Hazard& hz : hazards_) {
      if ((hz.position - state_.position()).norm() <
          hz.radius + cfg_.robot_radius + kStartClearance) {
        ok = false;
        break;
      }
    }
    if (ok && !(h_min() > 0.0)) ok = false;
    if (ok && cfg_.task == TaskKind::kGoal) ok = sample_goal(rng_, 1);
    if (ok) return observe();
  }
  throw std::runtime_error("environment reset: layout sampling failed after 1000 attempts");
}

bool Environment::sample_goal(std::mt19937_64& rng, int max_tries) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double lim = cfg_.arena_half_width - cfg_.goal_radius;
  for (int i = 0; i < max_tries; ++i) {
    const Vec2 g((2.0 * unit(rng) - 1.0) * lim, (2.0 * unit(rng) - 1.0) * lim);
    if ((g - state_.position()).norm() < cfg_.min_goal_distance) continue;
    bool clear = true;
    for (const Hazard& hz : hazards_) {
      if ((g - hz.position).norm() < hz.radius + cfg_.goal_radius) {
        clear = false;
        break;
      }
    }
    if (clear) {
      goal_ = g;
      return true;
    }
  }
  return false;
}

void Environment::propagate_hazards(double dt) {
  const double hw = cfg_.arena_half_width;
  for (Hazard& hz : hazards_) {
    hz.position += hz.velocity * dt;
    const double lim = hw - hz.radius;
    for (int k = 0; k < 2; ++k) {
      if (hz.position[k] > lim) {
        hz.position[k] = 2.0 * lim - hz.position[k];
        hz.velocity[k] = -std::abs(hz.velocity[k]);
      } else if (hz.position[k] < -lim) {
        hz.position[k] = -2.0 * lim - hz.position[k];
        hz.velocity[k] = std::abs(hz.velocity[k]);
      }
    }
  }
}

StateDeriv Environment::plant_deriv(const State& x, const Vec2& u, double t) const {
  return true_plant_deriv(x, make_control(cfg_.robot, u), true_params_, wind_at(cfg_.wind, t));
}

StepOutcome Environment::step(const Vec2& u_in) {
  const Vec2 u = cfg_.box.clamp(u_in);
  const double dt = cfg_.dt;
  const double prev_dist = (goal_ - state_.position()).norm();
  const double t0 = t_;
  const Vec6 next = rk4_step(state_.vec(), dt, [&](const Vec6& x, double tau) {
    return plant_deriv(State::from_vec(x), u, t0 + tau);
  });
  state_ = State::from_vec(next);
  propagate_hazards(dt);
  ++steps_;
  t_ = t0 + dt;

  StepOutcome out;
  const double dist = (goal_ - state_.position()).norm();
  out.reward = prev_dist - dist;
  if (dist <= cfg_.goal_radius) {
    out.reward += cfg_.goal_bonus;
    out.info.goal_reached = true;
    if (cfg_.task == TaskKind::kArena) {
      out.info.commute_time = t_ - trip_start_;
      trip_start_ = t_;
      heading_to_b_ = !heading_to_b_;
      goal_ = heading_to_b_ ? cfg_.endpoint_b : cfg_.endpoint_a;
    } else {
      // Keep the old goal if no clear spot is found this step.
      sample_goal(rng_, 100);
    }
  }
  out.info.h_min = h_min();
  out.cost = out.info.h_min < 0.0 ? 1.0 : 0.0;
  out.done = steps_ >= cfg_.episode_length;
  out.obs = observe();
  return out;
}

std::vector<Barrier> Environment::barriers() const {
  std::vector<Barrier> out;
  for (const Hazard& hz : hazards_) {
    out.emplace_back(CircleObstacle{hz.position, hz.velocity, hz.radius, cfg_.robot_radius});
  }
  if (cfg_.task == TaskKind::kArena) {
    const double off = cfg_.arena_half_width - cfg_.robot_radius;
    out.emplace_back(WallBarrier{Vec2(1.0, 0.0), off});
    out.emplace_back(WallBarrier{Vec2(-1.0, 0.0), off});
    out.emplace_back(WallBarrier{Vec2(0.0, 1.0), off});
    out.emplace_back(WallBarrier{Vec2(0.0, -1.0), off});
  }
  return out;
}

double Environment::h_min() const {
  double h = std::numeric_limits<double>::infinity();
  for (const Barrier& b : barriers()) h = std::min(h, barrier_value(state_, b, 0.0));
  return h;
}

Eigen::VectorXd Environment::observe() const {
  Eigen::VectorXd obs = Eigen::VectorXd::Zero(observation_dim());
  const double th = state_.theta_p;
  const double hw = cfg_.arena_half_width;
  obs[0] = std::sin(th);
  obs[1] = std::cos(th);
  obs[2] = state_.v_x;
  obs[3] = state_.v_y;
  obs[4] = state_.omega;
  obs.segment<2>(5) = to_body(goal_ - state_.position(), th) / hw;
  obs[7] = state_.x_p / hw;
  obs[8] = state_.y_p / hw;

  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t i = 0; i < hazards_.size(); ++i) {
    order.emplace_back((hazards_[i].position - state_.position()).norm(), i);
  }
  std::sort(order.begin(), order.end());
  const std::size_t k = std::min<std::size_t>(order.size(), kObservedHazards);
  for (std::size_t j = 0; j < k; ++j) {
    const Hazard& hz = hazards_[order[j].second];
    const auto base = static_cast<Eigen::Index>(9 + 4 * j);
    obs.segment<2>(base) = to_body(hz.position - state_.position(), th) / hw;
    obs.segment<2>(base + 2) = to_body(hz.velocity, th);
  }
  return obs;
}

}  // namespace resdob
