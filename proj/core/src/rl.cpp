#include "resdob/rl.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

namespace resdob::rl {

namespace {

constexpr double kSquashMargin = 1e-4;
constexpr double kLogStdMin = -4.0;
constexpr double kLogStdMax = 0.5;
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// log(1 - tanh(z)^2), stable for large |z|.
double log_one_minus_tanh_sq(double z) {
  return 2.0 * (std::numbers::ln2 - z - softplus(-2.0 * z));
}

Vec2 box_mid(const ControlBox& b) { return 0.5 * (b.upper + b.lower); }
Vec2 box_half(const ControlBox& b) { return 0.5 * (b.upper - b.lower); }

// Log-density of pre-squash z under N(mean, exp(log_std)) plus the change of variables.
double squashed_log_density(const Eigen::VectorXd& z, const Eigen::VectorXd& mean,
                            const Eigen::VectorXd& log_std, const ControlBox& box) {
  const Vec2 half = box_half(box);
  double lp = 0.0;
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    const double s = std::exp(log_std[j]);
    const double e = (z[j] - mean[j]) / s;
    lp += -0.5 * e * e - log_std[j] - kHalfLog2Pi;
    lp -= std::log(half[j]) + log_one_minus_tanh_sq(z[j]);
  }
  return lp;
}

std::vector<int> make_sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> s{in};
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(out);
  return s;
}

Eigen::VectorXd policy_flat(const PolicyState& p) {
  const Eigen::VectorXd net = nn::flatten_parameters(p.policy_net);
  Eigen::VectorXd flat(net.size() + p.log_std.size());
  flat << net, p.log_std;
  return flat;
}

void assign_policy_flat(PolicyState& p, const Eigen::VectorXd& flat) {
  const Eigen::Index n = p.policy_net.num_parameters();
  nn::assign_parameters(p.policy_net, flat.head(n));
  p.log_std = flat.tail(p.log_std.size()).cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
}

void clip_norm(Eigen::VectorXd& g, double max_norm) {
  if (max_norm <= 0.0) return;
  const double n = g.norm();
  if (n > max_norm) g *= max_norm / n;
}

// One Adam step on a critic toward `targets`; returns the mean squared error / 2.
double fit_critic(nn::Mlp& critic, nn::Adam& opt, const Eigen::MatrixXd& obs,
                  const Eigen::VectorXd& targets, double max_grad_norm) {
  const Eigen::Index b = obs.cols();
  const Eigen::RowVectorXd pred = nn::forward_batch(critic, obs).row(0);
  const Eigen::RowVectorXd diff = pred - targets.transpose();
  const Eigen::MatrixXd out_grad = diff / static_cast<double>(b);
  const nn::Gradients g = nn::backward_batch(critic, obs, out_grad);
  Eigen::VectorXd flat_g = nn::flatten_gradients(g);
  clip_norm(flat_g, max_grad_norm);
  Eigen::VectorXd params = nn::flatten_parameters(critic);
  opt.step(params, flat_g);
  nn::assign_parameters(critic, params);
  return 0.5 * diff.squaredNorm() / static_cast<double>(b);
}

}  // namespace

PolicyState make_policy(int obs_dim, const ControlBox& box, const PpoConfig& cfg,
                        std::uint64_t seed) {
  if (obs_dim <= 0) throw std::invalid_argument("make_policy: obs_dim must be positive");
  std::mt19937_64 rng(seed);
  PolicyState p;
  p.policy_net = nn::make_glorot_mlp(make_sizes(obs_dim, cfg.hidden, kControlDim), rng);
  // Small output layer keeps the initial mean near the box center.
  p.policy_net.weights.back() *= 0.01;
  p.log_std = Eigen::VectorXd::Constant(kControlDim, cfg.init_log_std);
  p.value_net = nn::make_glorot_mlp(make_sizes(obs_dim, cfg.hidden, 1), rng);
  p.cost_value_net = nn::make_glorot_mlp(make_sizes(obs_dim, cfg.hidden, 1), rng);
  p.lambda = cfg.lambda_init;
  p.target_cost = cfg.target_cost;
  p.box = box;
  p.policy_opt = nn::Adam(p.policy_net.num_parameters() + kControlDim, cfg.policy_lr);
  p.value_opt = nn::Adam(p.value_net.num_parameters(), cfg.value_lr);
  p.cost_value_opt = nn::Adam(p.cost_value_net.num_parameters(), cfg.value_lr);
  return p;
}

Vec2 squash(const ControlBox& box, const Eigen::VectorXd& z) {
  return box_mid(box) + box_half(box).cwiseProduct(Vec2(std::tanh(z[0]), std::tanh(z[1])));
}

Eigen::VectorXd unsquash(const ControlBox& box, const Vec2& u) {
  const Vec2 y = (u - box_mid(box)).cwiseQuotient(box_half(box));
  Eigen::VectorXd z(kControlDim);
  for (int j = 0; j < kControlDim; ++j) {
    z[j] = std::atanh(std::clamp(y[j], -1.0 + kSquashMargin, 1.0 - kSquashMargin));
  }
  return z;
}

Action act(const PolicyState& policy, const Eigen::VectorXd& obs, std::mt19937_64& rng,
           bool deterministic) {
  const Eigen::VectorXd mean = nn::forward(policy.policy_net, obs);
  Eigen::VectorXd z = mean;
  if (!deterministic) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index j = 0; j < z.size(); ++j) z[j] += std::exp(policy.log_std[j]) * normal(rng);
  }
  Action a;
  a.u = squash(policy.box, z);
  a.log_prob = squashed_log_density(z, mean, policy.log_std, policy.box);
  a.pre_squash = std::move(z);
  return a;
}

double log_prob(const PolicyState& policy, const Eigen::VectorXd& obs, const Vec2& u) {
  const Eigen::VectorXd mean = nn::forward(policy.policy_net, obs);
  return squashed_log_density(unsquash(policy.box, u), mean, policy.log_std, policy.box);
}

double value(const nn::Mlp& critic, const Eigen::VectorXd& obs) {
  return nn::forward(critic, obs)[0];
}

void RolloutBuffer::clear() { *this = RolloutBuffer{}; }

double RolloutBuffer::mean_episode_cost() const {
  if (episode_costs.empty()) return 0.0;
  return std::accumulate(episode_costs.begin(), episode_costs.end(), 0.0) /
         static_cast<double>(episode_costs.size());
}

double RolloutBuffer::mean_episode_reward() const {
  if (episode_rewards.empty()) return 0.0;
  return std::accumulate(episode_rewards.begin(), episode_rewards.end(), 0.0) /
         static_cast<double>(episode_rewards.size());
}

void compute_advantages(RolloutBuffer& buffer, double gamma, double gae_lambda) {
  const auto n = static_cast<Eigen::Index>(buffer.transitions.size());
  buffer.adv_reward.resize(n);
  buffer.adv_cost.resize(n);
  buffer.ret_reward.resize(n);
  buffer.ret_cost.resize(n);
  double gae_r = 0.0;
  double gae_c = 0.0;
  for (Eigen::Index i = n; i-- > 0;) {
    const Transition& tr = buffer.transitions[static_cast<std::size_t>(i)];
    if (tr.done) {
      gae_r = 0.0;
      gae_c = 0.0;
    }
    const double delta_r = tr.reward + gamma * tr.next_value - tr.value;
    const double delta_c = tr.cost + gamma * tr.next_cost_value - tr.cost_value;
    gae_r = delta_r + gamma * gae_lambda * gae_r;
    gae_c = delta_c + gamma * gae_lambda * gae_c;
    buffer.adv_reward[i] = gae_r;
    buffer.adv_cost[i] = gae_c;
    buffer.ret_reward[i] = gae_r + tr.value;
    buffer.ret_cost[i] = gae_c + tr.cost_value;
  }
  buffer.adv_reward_norm = buffer.adv_reward;
  if (n > 0) {
    const double mean = buffer.adv_reward.mean();
    const double var = (buffer.adv_reward.array() - mean).square().mean();
    buffer.adv_reward_norm = (buffer.adv_reward.array() - mean) / (std::sqrt(var) + 1e-8);
  }
}

UpdateStats update(PolicyState& policy, const RolloutBuffer& buffer, const PpoConfig& cfg,
                   std::mt19937_64& rng) {
  UpdateStats stats;
  const auto n = static_cast<Eigen::Index>(buffer.transitions.size());
  if (n == 0 || buffer.adv_reward_norm.size() != n) {
    stats.skipped = true;
    stats.lambda = policy.lambda;
    return stats;
  }
  const Eigen::Index obs_dim = buffer.transitions.front().obs.size();

  Eigen::MatrixXd obs(obs_dim, n);
  Eigen::MatrixXd z(kControlDim, n);
  Eigen::VectorXd old_logp(n);
  Eigen::VectorXd corr(n);  // squash correction, constant in the policy parameters
  const Vec2 half = box_half(policy.box);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& tr = buffer.transitions[static_cast<std::size_t>(i)];
    obs.col(i) = tr.obs;
    z.col(i) = unsquash(policy.box, tr.u_safe);
    old_logp[i] = tr.log_prob;
    double c = 0.0;
    for (int j = 0; j < kControlDim; ++j) c += std::log(half[j]) + log_one_minus_tanh_sq(z(j, i));
    corr[i] = c;
  }

  Eigen::VectorXd adv = buffer.adv_reward_norm;
  if (cfg.lagrangian) {
    const double lam = policy.lambda;
    adv = (buffer.adv_reward_norm - lam * buffer.adv_cost) / (1.0 + lam);
  }

  auto log_probs = [&](const Eigen::MatrixXd& mean, const Eigen::MatrixXd& zz,
                       const Eigen::VectorXd& log_std, const Eigen::VectorXd& corr_mb) {
    Eigen::VectorXd lp(zz.cols());
    const Eigen::VectorXd inv_std = (-log_std.array()).exp();
    for (Eigen::Index i = 0; i < zz.cols(); ++i) {
      double v = 0.0;
      for (int j = 0; j < kControlDim; ++j) {
        const double e = (zz(j, i) - mean(j, i)) * inv_std[j];
        v += -0.5 * e * e - log_std[j] - kHalfLog2Pi;
      }
      lp[i] = v - corr_mb[i];
    }
    return lp;
  };

  const PolicyState backup = policy;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const Eigen::Index mb = std::max<Eigen::Index>(1, std::min<Eigen::Index>(cfg.minibatch_size, n));

  bool policy_active = true;
  double kl_sum = 0.0, clip_sum = 0.0, pl_sum = 0.0, vl_sum = 0.0, cl_sum = 0.0;
  long long n_mb = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_kl = 0.0;
    for (Eigen::Index start = 0; start < n; start += mb) {
      const Eigen::Index len = std::min(mb, n - start);
      Eigen::MatrixXd o(obs_dim, len), zz(kControlDim, len);
      Eigen::VectorXd a(len), lp_old(len), cr(len), ret_r(len), ret_c(len);
      for (Eigen::Index k = 0; k < len; ++k) {
        const Eigen::Index i = order[static_cast<std::size_t>(start + k)];
        o.col(k) = obs.col(i);
        zz.col(k) = z.col(i);
        a[k] = adv[i];
        lp_old[k] = old_logp[i];
        cr[k] = corr[i];
        ret_r[k] = buffer.ret_reward[i];
        ret_c[k] = buffer.ret_cost[i];
      }
      const double inv_b = 1.0 / static_cast<double>(len);

      if (policy_active) {
        const Eigen::MatrixXd mean = nn::forward_batch(policy.policy_net, o);
        const Eigen::VectorXd lp = log_probs(mean, zz, policy.log_std, cr);
        Eigen::MatrixXd d_mean(kControlDim, len);
        Eigen::VectorXd d_logstd = Eigen::VectorXd::Zero(kControlDim);
        double loss = 0.0;
        const Eigen::VectorXd inv_var = (-2.0 * policy.log_std.array()).exp();
        for (Eigen::Index k = 0; k < len; ++k) {
          const double ratio = std::exp(lp[k] - lp_old[k]);
          const double clipped = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
          const double s1 = ratio * a[k];
          const double s2 = clipped * a[k];
          loss -= std::min(s1, s2) * inv_b;
          const bool use_unclipped = s1 <= s2;
          if (!use_unclipped) clip_sum += 1.0;
          epoch_kl += (lp_old[k] - lp[k]);
          const double dl_dlp = use_unclipped ? -ratio * a[k] * inv_b : 0.0;
          for (int j = 0; j < kControlDim; ++j) {
            const double diff = zz(j, k) - mean(j, k);
            d_mean(j, k) = dl_dlp * diff * inv_var[j];
            d_logstd[j] += dl_dlp * (diff * diff * inv_var[j] - 1.0);
          }
        }
        // Gaussian entropy grows with log_std at rate 1 per dimension.
        d_logstd.array() -= cfg.entropy_coef;
        if (!std::isfinite(loss) || !d_mean.allFinite()) {
          policy = backup;
          stats.skipped = true;
          stats.lambda = policy.lambda;
          return stats;
        }
        const nn::Gradients g = nn::backward_batch(policy.policy_net, o, d_mean);
        const Eigen::VectorXd gnet = nn::flatten_gradients(g);
        Eigen::VectorXd flat_g(gnet.size() + kControlDim);
        flat_g << gnet, d_logstd;
        clip_norm(flat_g, cfg.max_grad_norm);
        Eigen::VectorXd params = policy_flat(policy);
        policy.policy_opt.step(params, flat_g);
        assign_policy_flat(policy, params);
        pl_sum += loss;
      }

      vl_sum += fit_critic(policy.value_net, policy.value_opt, o, ret_r, cfg.max_grad_norm);
      cl_sum += fit_critic(policy.cost_value_net, policy.cost_value_opt, o, ret_c, cfg.max_grad_norm);
      ++n_mb;
    }
    if (policy_active) {
      ++stats.policy_epochs;
      kl_sum = epoch_kl / static_cast<double>(n);
      if (cfg.target_kl > 0.0 && kl_sum > 1.5 * cfg.target_kl) policy_active = false;
    }
  }

  if (!policy.policy_net.finite() || !policy.value_net.finite() ||
      !policy.cost_value_net.finite() || !policy.log_std.allFinite()) {
    policy = backup;
    stats.skipped = true;
    stats.lambda = policy.lambda;
    return stats;
  }

  // Post-update ratio sanity on the whole batch.
  {
    const Eigen::MatrixXd mean = nn::forward_batch(policy.policy_net, obs);
    const Eigen::VectorXd lp = log_probs(mean, z, policy.log_std, corr);
    Eigen::Index in_range = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = std::exp(lp[i] - old_logp[i]);
      if (r >= 0.6 && r <= 1.6) ++in_range;
    }
    stats.ratio_in_range_fraction = static_cast<double>(in_range) / static_cast<double>(n);
  }

  if (cfg.lagrangian) {
    policy.lambda =
        std::max(0.0, policy.lambda + cfg.lambda_lr * (buffer.mean_episode_cost() - policy.target_cost));
  }

  const double mbs = static_cast<double>(std::max<long long>(1, n_mb));
  stats.policy_loss = pl_sum / mbs;
  stats.value_loss = vl_sum / mbs;
  stats.cost_value_loss = cl_sum / mbs;
  stats.approx_kl = kl_sum;
  stats.clip_fraction = clip_sum / static_cast<double>(n * std::max(1, stats.policy_epochs));
  stats.lambda = policy.lambda;
  return stats;
}

void save_policy(std::ostream& out, const PolicyState& p) {
  out << "resdob-policy 1\n" << std::hexfloat;
  out << "lambda " << p.lambda << "\ntarget_cost " << p.target_cost << '\n';
  out << "box " << p.box.lower[0] << ' ' << p.box.lower[1] << ' ' << p.box.upper[0] << ' '
      << p.box.upper[1] << '\n';
  out << "log_std " << p.log_std[0] << ' ' << p.log_std[1] << '\n' << std::defaultfloat;
  nn::save_mlp(out, p.policy_net);
  nn::save_mlp(out, p.value_net);
  nn::save_mlp(out, p.cost_value_net);
}

PolicyState load_policy(std::istream& in, const PpoConfig& cfg) {
  auto read_double = [&in]() {
    std::string tok;
    in >> tok;
    if (!in) throw std::runtime_error("load_policy: truncated header");
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str()) throw std::runtime_error("load_policy: bad number '" + tok + "'");
    return v;
  };
  auto expect = [&in](const char* key) {
    std::string tok;
    in >> tok;
    if (tok != key) throw std::runtime_error(std::string("load_policy: expected '") + key + "'");
  };
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (!in || magic != "resdob-policy" || version != 1) {
    throw std::runtime_error("load_policy: bad header");
  }
  PolicyState p;
  expect("lambda");
  p.lambda = read_double();
  expect("target_cost");
  p.target_cost = read_double();
  expect("box");
  p.box.lower[0] = read_double();
  p.box.lower[1] = read_double();
  p.box.upper[0] = read_double();
  p.box.upper[1] = read_double();
  expect("log_std");
  p.log_std.resize(kControlDim);
  p.log_std[0] = read_double();
  p.log_std[1] = read_double();
  p.policy_net = nn::load_mlp(in);
  p.value_net = nn::load_mlp(in);
  p.cost_value_net = nn::load_mlp(in);
  if (p.policy_net.output_dim() != kControlDim || p.value_net.output_dim() != 1 ||
      p.cost_value_net.output_dim() != 1 ||
      p.value_net.input_dim() != p.policy_net.input_dim()) {
    throw std::runtime_error("load_policy: network shapes are inconsistent");
  }
  p.policy_opt = nn::Adam(p.policy_net.num_parameters() + kControlDim, cfg.policy_lr);
  p.value_opt = nn::Adam(p.value_net.num_parameters(), cfg.value_lr);
  p.cost_value_opt = nn::Adam(p.cost_value_net.num_parameters(), cfg.value_lr);
  return p;
}

}  // namespace resdob::rl
