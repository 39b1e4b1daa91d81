#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "orl/random.hpp"

namespace orl::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr double kLeakySlope = 0.01;

/// One dense layer: y = W x + b, with W stored as (out × in).
struct Layer {
  Matrix weight;
  Vector bias;
};

/// Adam moments shaped like the layers they track.
struct AdamState {
  std::vector<Layer> first;
  std::vector<Layer> second;
  std::uint64_t step = 0;
};

/// Parameters of a multilayer perceptron. Hidden layers use leaky ReLU, the
/// output layer is linear.
struct NetParams {
  std::vector<Layer> layers;
  AdamState adam;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().weight.cols(); }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().weight.rows(); }
  std::size_t parameter_count() const;
};

using Gradients = std::vector<Layer>;

/// Per-layer inputs and hidden pre-activations recorded by a forward pass.
struct ForwardCache {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre_activations;

  bool empty() const { return inputs.empty(); }
};

struct BackwardResult {
  Gradients grads;
  Matrix input_grad;  // ∂loss/∂input, same shape as the forward input
};

/// Builds an MLP with layer sizes `dims` (input first). Hidden weights are
/// He-uniform on ±sqrt(6/fan_in), the output layer uses ±1/sqrt(fan_in),
/// biases start at zero. Adam moments are zero-initialised.
NetParams make_mlp(std::span<const std::size_t> dims, Rng& rng);
NetParams make_mlp(std::initializer_list<std::size_t> dims, Rng& rng);

/// Zero-valued gradient set shaped like `params`.
Gradients zero_gradients(const NetParams& params);

double leaky_relu(double x);
/// Derivative of leaky ReLU; defined as 1 at exactly 0.
double leaky_relu_grad(double x);

/// Batched forward pass: rows of `input` are samples.
Matrix mlp_forward(const NetParams& params, const Matrix& input, ForwardCache* cache = nullptr);
Vector mlp_forward(const NetParams& params, const Vector& input);

/// Backpropagates `output_grad` (batch × out) through the cached forward pass.
/// Gradients are summed over the batch rows.
BackwardResult mlp_backward(const NetParams& params, const ForwardCache& cache,
                            const Matrix& output_grad);

/// In-place Adam update (β1 = 0.9, β2 = 0.999, ε = 1e-8, bias-corrected).
/// Throws DivergenceError on a non-finite gradient, leaving params untouched.
void adam_step(NetParams& params, const Gradients& grads, double lr);

/// target ← (1 − alpha)·target + alpha·online, parameters only.
void polyak_update(NetParams& target, const NetParams& online, double alpha);

/// Copies parameters, resets optimiser state.
NetParams clone_parameters(const NetParams& params);

inline double clipped_double_q(double q1, double q2) { return q1 < q2 ? q1 : q2; }
Vector clipped_double_q(const Vector& q1, const Vector& q2);
Matrix clipped_double_q(const Matrix& q1, const Matrix& q2);

bool all_finite(const NetParams& params);

}  // namespace orl::nn
