#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include "resdob/dynamics.hpp"
#include "resdob/nn.hpp"

namespace resdob::rl {

struct PpoConfig {
  std::vector<int> hidden{64, 64};
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  double policy_lr = 3e-4;
  double value_lr = 1e-3;
  int epochs = 10;
  int minibatch_size = 64;
  double target_kl = 0.02;  // early stop of policy epochs; <= 0 disables
  double max_grad_norm = 0.5;
  double entropy_coef = 0.0;
  double init_log_std = -0.5;
  double lambda_init = 1.0;
  double lambda_lr = 0.05;
  double target_cost = 5.0;
  bool lagrangian = true;
};

/// Gaussian policy squashed into the control box, plus reward and cost critics.
struct PolicyState {
  nn::Mlp policy_net;
  Eigen::VectorXd log_std;
  nn::Mlp value_net;
  nn::Mlp cost_value_net;
  double lambda = 1.0;
  double target_cost = 5.0;
  ControlBox box;

  nn::Adam policy_opt;  // over [policy_net params, log_std]
  nn::Adam value_opt;
  nn::Adam cost_value_opt;
};

PolicyState make_policy(int obs_dim, const ControlBox& box, const PpoConfig& cfg,
                        std::uint64_t seed);

/// u = mid + half * tanh(z).
Vec2 squash(const ControlBox& box, const Eigen::VectorXd& z);
/// Inverse of squash; u is pulled inside the open box by a small margin first.
Eigen::VectorXd unsquash(const ControlBox& box, const Vec2& u);

struct Action {
  Vec2 u = Vec2::Zero();
  double log_prob = 0.0;
  Eigen::VectorXd pre_squash;
};

/// Samples an action. `deterministic` returns the squashed mean.
Action act(const PolicyState& policy, const Eigen::VectorXd& obs, std::mt19937_64& rng,
           bool deterministic = false);

/// Log-density of the squashed Gaussian at u.
double log_prob(const PolicyState& policy, const Eigen::VectorXd& obs, const Vec2& u);

double value(const nn::Mlp& critic, const Eigen::VectorXd& obs);

struct Transition {
  Eigen::VectorXd obs;
  Vec2 u_safe = Vec2::Zero();
  Vec2 u_rl = Vec2::Zero();
  double reward = 0.0;
  double cost = 0.0;
  double log_prob = 0.0;  // of u_safe under the behaviour policy
  bool done = false;      // last step of an episode
  double value = 0.0;
  double cost_value = 0.0;
  double next_value = 0.0;  // critic at the successor state (bootstrap on done)
  double next_cost_value = 0.0;
};

struct RolloutBuffer {
  std::vector<Transition> transitions;
  Eigen::VectorXd adv_reward;      // raw GAE
  Eigen::VectorXd adv_reward_norm; // zero mean, unit variance
  Eigen::VectorXd adv_cost;        // raw GAE
  Eigen::VectorXd ret_reward;
  Eigen::VectorXd ret_cost;
  std::vector<double> episode_rewards;
  std::vector<double> episode_costs;

  void clear();
  double mean_episode_cost() const;
  double mean_episode_reward() const;
};

/// Generalized advantage estimation for the reward and cost channels.
void compute_advantages(RolloutBuffer& buffer, double gamma, double gae_lambda);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double cost_value_loss = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double ratio_in_range_fraction = 1.0;  // share of ratios in [0.6, 1.6] after the update
  double lambda = 0.0;
  int policy_epochs = 0;
  bool skipped = false;
};

/// Clipped-surrogate update on (A_r - lambda A_c) / (1 + lambda), critic fits,
/// then lambda <- max(0, lambda + lambda_lr (mean episode cost - target)).
/// With cfg.lagrangian false the plain PPO objective A_r is used and lambda is
/// left alone.
UpdateStats update(PolicyState& policy, const RolloutBuffer& buffer, const PpoConfig& cfg,
                   std::mt19937_64& rng);

void save_policy(std::ostream& out, const PolicyState& policy);
PolicyState load_policy(std::istream& in, const PpoConfig& cfg);

}  // namespace resdob::rl
