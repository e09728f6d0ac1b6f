#include "resdob/nn.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace resdob::nn {

namespace {

constexpr const char* kMagic = "resdob-mlp";
constexpr int kVersion = 1;

void check_sizes(const std::vector<int>& sizes) {
  if (sizes.size() < 2) throw std::invalid_argument("mlp needs at least input and output sizes");
  for (int s : sizes) {
    if (s <= 0) throw std::invalid_argument("mlp layer sizes must be positive");
  }
}

// tanh from a single exp; std::tanh near zero where 1 - t cancels.
double fast_tanh(double x) {
  const double a = std::abs(x);
  if (a < 0.02) return std::tanh(x);
  const double t = std::exp(-2.0 * a);
  return std::copysign((1.0 - t) / (1.0 + t), x);
}

// Post-activation values per layer; acts[0] is the input.
std::vector<Eigen::MatrixXd> forward_cache(const Mlp& net, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != net.input_dim()) {
    throw std::invalid_argument("mlp forward: input dimension " + std::to_string(inputs.rows()) +
                                " != " + std::to_string(net.input_dim()));
  }
  const std::size_t n_layers = net.weights.size();
  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(n_layers + 1);
  acts.push_back(inputs);
  for (std::size_t l = 0; l < n_layers; ++l) {
    Eigen::MatrixXd z = net.weights[l] * acts.back();
    z.colwise() += net.biases[l];
    if (l + 1 < n_layers) z = z.unaryExpr(&fast_tanh);
    acts.push_back(std::move(z));
  }
  return acts;
}

Gradients backprop(const Mlp& net, const std::vector<Eigen::MatrixXd>& acts,
                   const Eigen::MatrixXd& output_grads) {
  const std::size_t n_layers = net.weights.size();
  if (output_grads.rows() != net.output_dim() || output_grads.cols() != acts.front().cols()) {
    throw std::invalid_argument("mlp backward: output gradient shape mismatch");
  }
  Gradients g;
  g.weights.resize(n_layers);
  g.biases.resize(n_layers);
  Eigen::MatrixXd delta = output_grads;
  for (std::size_t l = n_layers; l-- > 0;) {
    g.weights[l] = delta * acts[l].transpose();
    g.biases[l] = delta.rowwise().sum();
    Eigen::MatrixXd upstream = net.weights[l].transpose() * delta;
    if (l > 0) {
      // tanh'(z) = 1 - tanh(z)^2, and acts[l] already holds tanh(z).
      upstream.array() *= 1.0 - acts[l].array().square();
    }
    delta = std::move(upstream);
  }
  g.input = std::move(delta);
  return g;
}

}  // namespace

std::vector<int> Mlp::layer_sizes() const {
  std::vector<int> sizes;
  if (weights.empty()) return sizes;
  sizes.push_back(static_cast<int>(weights.front().cols()));
  for (const auto& w : weights) sizes.push_back(static_cast<int>(w.rows()));
  return sizes;
}

int Mlp::input_dim() const {
  return weights.empty() ? 0 : static_cast<int>(weights.front().cols());
}

int Mlp::output_dim() const {
  return weights.empty() ? 0 : static_cast<int>(weights.back().rows());
}

int Mlp::num_parameters() const {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return static_cast<int>(n);
}

bool Mlp::finite() const {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  }
  return true;
}

Mlp make_zero_mlp(const std::vector<int>& sizes) {
  check_sizes(sizes);
  Mlp net;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    net.weights.push_back(Eigen::MatrixXd::Zero(sizes[l + 1], sizes[l]));
    net.biases.push_back(Eigen::VectorXd::Zero(sizes[l + 1]));
  }
  return net;
}

Mlp make_glorot_mlp(const std::vector<int>& sizes, std::mt19937_64& rng) {
  Mlp net = make_zero_mlp(sizes);
  for (auto& w : net.weights) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
    }
  }
  return net;
}

double Gradients::parameter_norm() const {
  double sq = 0.0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    sq += weights[l].squaredNorm() + biases[l].squaredNorm();
  }
  return std::sqrt(sq);
}

void Gradients::scale_parameters(double factor) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] *= factor;
    biases[l] *= factor;
  }
}

bool Gradients::finite() const {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  }
  return input.allFinite();
}

Gradients zero_gradients(const Mlp& net) {
  Gradients g;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    g.weights.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
  }
  g.input = Eigen::MatrixXd::Zero(net.input_dim(), 1);
  return g;
}

Eigen::VectorXd forward(const Mlp& net, const Eigen::VectorXd& input) {
  return forward_cache(net, input).back().col(0);
}

Eigen::MatrixXd forward_batch(const Mlp& net, const Eigen::MatrixXd& inputs) {
  return forward_cache(net, inputs).back();
}

Gradients backward(const Mlp& net, const Eigen::VectorXd& input,
                   const Eigen::VectorXd& output_grad) {
  return backprop(net, forward_cache(net, input), output_grad);
}

Gradients backward_batch(const Mlp& net, const Eigen::MatrixXd& inputs,
                         const Eigen::MatrixXd& output_grads) {
  return backprop(net, forward_cache(net, inputs), output_grads);
}

Eigen::MatrixXd input_jacobian(const Mlp& net, const Eigen::VectorXd& input) {
  const int out = net.output_dim();
  // Replicate the input once per output channel and backpropagate the identity.
  const Eigen::MatrixXd inputs = input.replicate(1, out);
  const auto acts = forward_cache(net, inputs);
  const Gradients g = backprop(net, acts, Eigen::MatrixXd::Identity(out, out));
  return g.input.transpose();
}

Mlp sgd_step(const Mlp& net, const Gradients& grads, double learning_rate) {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("sgd_step: learning rate must be > 0");
  if (grads.weights.size() != net.weights.size()) {
    throw std::invalid_argument("sgd_step: gradient shape mismatch");
  }
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    if (!grads.weights[l].allFinite() || !grads.biases[l].allFinite()) {
      throw std::domain_error("sgd_step: non-finite gradient, step rejected");
    }
  }
  Mlp next = net;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    next.weights[l] -= learning_rate * grads.weights[l];
    next.biases[l] -= learning_rate * grads.biases[l];
  }
  return next;
}

Eigen::VectorXd flatten_parameters(const Mlp& net) {
  Eigen::VectorXd flat(net.num_parameters());
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    const auto& w = net.weights[l];
    flat.segment(k, w.size()) = Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
    k += w.size();
    flat.segment(k, net.biases[l].size()) = net.biases[l];
    k += net.biases[l].size();
  }
  return flat;
}

void assign_parameters(Mlp& net, const Eigen::VectorXd& flat) {
  if (flat.size() != net.num_parameters()) {
    throw std::invalid_argument("assign_parameters: size mismatch");
  }
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    auto& w = net.weights[l];
    Eigen::Map<Eigen::VectorXd>(w.data(), w.size()) = flat.segment(k, w.size());
    k += w.size();
    net.biases[l] = flat.segment(k, net.biases[l].size());
    k += net.biases[l].size();
  }
}

Eigen::VectorXd flatten_gradients(const Gradients& grads) {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l < grads.weights.size(); ++l) {
    n += grads.weights[l].size() + grads.biases[l].size();
  }
  Eigen::VectorXd flat(n);
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < grads.weights.size(); ++l) {
    const auto& w = grads.weights[l];
    flat.segment(k, w.size()) = Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
    k += w.size();
    flat.segment(k, grads.biases[l].size()) = grads.biases[l];
    k += grads.biases[l].size();
  }
  return flat;
}

void save_mlp(std::ostream& out, const Mlp& net) {
  out << kMagic << ' ' << kVersion << '\n';
  const auto sizes = net.layer_sizes();
  out << "layers " << sizes.size();
  for (int s : sizes) out << ' ' << s;
  out << '\n';
  const Eigen::VectorXd flat = flatten_parameters(net);
  out << std::hexfloat;
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    out << flat[i] << ((i + 1) % 8 == 0 || i + 1 == flat.size() ? '\n' : ' ');
  }
  out << std::defaultfloat;
  out << "end\n";
}

Mlp load_mlp(std::istream& in) {
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (!in || magic != kMagic) throw std::runtime_error("load_mlp: missing checkpoint header");
  if (version != kVersion) {
    throw std::runtime_error("load_mlp: unsupported checkpoint version " + std::to_string(version));
  }
  std::string tag;
  std::size_t n = 0;
  in >> tag >> n;
  if (!in || tag != "layers" || n < 2 || n > 64) {
    throw std::runtime_error("load_mlp: malformed layer header");
  }
  std::vector<int> sizes(n);
  for (auto& s : sizes) in >> s;
  if (!in) throw std::runtime_error("load_mlp: malformed layer sizes");
  Mlp net = make_zero_mlp(sizes);
  Eigen::VectorXd flat(net.num_parameters());
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    // operator>> does not parse hexfloat portably; go through strtod.
    std::string token;
    in >> token;
    if (!in) throw std::runtime_error("load_mlp: truncated parameter block");
    char* end = nullptr;
    flat[i] = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0') {
      throw std::runtime_error("load_mlp: bad parameter token '" + token + "'");
    }
  }
  in >> tag;
  if (tag != "end") throw std::runtime_error("load_mlp: missing end marker");
  assign_parameters(net, flat);
  return net;
}

Adam::Adam(Eigen::Index size, double learning_rate, double beta1, double beta2, double epsilon)
    : m(Eigen::VectorXd::Zero(size)),
      v(Eigen::VectorXd::Zero(size)),
      lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(epsilon) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (grad.size() != params.size() || m.size() != params.size()) {
    throw std::invalid_argument("Adam::step: size mismatch");
  }
  ++t;
  m = beta1_ * m + (1.0 - beta1_) * grad;
  v = beta2_ * v + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t));
  params.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
}

}  // namespace resdob::nn
