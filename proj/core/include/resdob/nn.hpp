#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <random>
#include <vector>

namespace resdob::nn {

/// Fully connected network: tanh on hidden layers, identity on the output.
/// weights[l] has shape layer_sizes[l+1] x layer_sizes[l].
struct Mlp {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  std::vector<int> layer_sizes() const;
  int input_dim() const;
  int output_dim() const;
  int num_parameters() const;
  bool finite() const;
};

/// Network with all parameters zero.
Mlp make_zero_mlp(const std::vector<int>& layer_sizes);

/// Uniform(+-sqrt(6 / (fan_in + fan_out))) weights, zero biases.
Mlp make_glorot_mlp(const std::vector<int>& layer_sizes, std::mt19937_64& rng);

/// Same shapes as an Mlp's parameters. `input` holds one column per sample.
struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  Eigen::MatrixXd input;

  double parameter_norm() const;
  void scale_parameters(double factor);
  bool finite() const;
};

Gradients zero_gradients(const Mlp& net);

Eigen::VectorXd forward(const Mlp& net, const Eigen::VectorXd& input);
/// Column-wise forward pass; inputs is input_dim x batch.
Eigen::MatrixXd forward_batch(const Mlp& net, const Eigen::MatrixXd& inputs);

/// Reverse-mode gradients of output^T * output_grad.
Gradients backward(const Mlp& net, const Eigen::VectorXd& input,
                   const Eigen::VectorXd& output_grad);
/// Parameter gradients summed over the batch; input gradients per column.
Gradients backward_batch(const Mlp& net, const Eigen::MatrixXd& inputs,
                         const Eigen::MatrixXd& output_grads);

/// d output / d input, output_dim x input_dim.
Eigen::MatrixXd input_jacobian(const Mlp& net, const Eigen::VectorXd& input);

/// theta <- theta - learning_rate * grad. Throws std::domain_error on a
/// non-finite gradient and std::invalid_argument on a non-positive rate.
Mlp sgd_step(const Mlp& net, const Gradients& grads, double learning_rate);

Eigen::VectorXd flatten_parameters(const Mlp& net);
void assign_parameters(Mlp& net, const Eigen::VectorXd& flat);
Eigen::VectorXd flatten_gradients(const Gradients& grads);

/// Text checkpoint: version tag, layer-size header, hexfloat parameters.
void save_mlp(std::ostream& out, const Mlp& net);
Mlp load_mlp(std::istream& in);

/// Adam moments over a flat parameter vector.
class Adam {
 public:
  Adam() = default;
  Adam(Eigen::Index size, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double epsilon = 1e-8);

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

  // Exposed for checkpointing.
  Eigen::VectorXd m, v;
  long long t = 0;

 private:
  double lr_ = 1e-3;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
};

}  // namespace resdob::nn
