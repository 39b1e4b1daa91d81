#pragma once

#include <array>

#include "orl/random.hpp"

namespace orl::nn {

inline constexpr double kBetaActionEps = 1e-6;

double softplus(double x);
double sigmoid(double x);

/// Beta distribution over an action interval [low, high]. Parameters come
/// from two raw network outputs through softplus(x) + 1, so alpha, beta > 1
/// and the density is unimodal.
class BetaHead {
 public:
  BetaHead(double alpha, double beta, double low, double high);

  static BetaHead from_raw(double raw_alpha, double raw_beta, double low, double high);

  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  double low() const { return low_; }
  double high() const { return high_; }

  double mean() const;
  /// Log-density of an action in [low, high] units, including the −log(high − low)
  /// change of variables. Actions are clamped into (low + ε, high − ε) first.
  double log_density(double action) const;
  /// ∂ log_density / ∂(alpha, beta).
  std::array<double, 2> log_density_grad(double action) const;
  double entropy() const;
  /// ∂ entropy / ∂(alpha, beta).
  std::array<double, 2> entropy_grad() const;
  double sample(Rng& rng) const;

 private:
  double unit(double action) const;

  double alpha_;
  double beta_;
  double low_;
  double high_;
};

/// Chain rule through the softplus+1 transform: maps ∂/∂(alpha, beta) to ∂/∂raw.
std::array<double, 2> beta_raw_grad(double raw_alpha, double raw_beta,
                                    const std::array<double, 2>& param_grad);

}  // namespace orl::nn
