#include "orl/nn/beta_head.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "orl/errors.hpp"

namespace orl::nn {

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

BetaHead::BetaHead(double alpha, double beta, double low, double high)
    : alpha_(alpha), beta_(beta), low_(low), high_(high) {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw DomainError("BetaHead: parameters must be positive");
  if (!(low < high)) throw ConfigError("BetaHead: need low < high");
}

BetaHead BetaHead::from_raw(double raw_alpha, double raw_beta, double low, double high) {
  return BetaHead(softplus(raw_alpha) + 1.0, softplus(raw_beta) + 1.0, low, high);
}

double BetaHead::mean() const { return low_ + (high_ - low_) * alpha_ / (alpha_ + beta_); }

double BetaHead::unit(double action) const {
  const double a = std::clamp(action, low_ + kBetaActionEps, high_ - kBetaActionEps);
  return (a - low_) / (high_ - low_);
}

double BetaHead::log_density(double action) const {
  const double y = unit(action);
  const double log_norm = std::lgamma(alpha_) + std::lgamma(beta_) - std::lgamma(alpha_ + beta_);
  return (alpha_ - 1.0) * std::log(y) + (beta_ - 1.0) * std::log1p(-y) - log_norm -
         std::log(high_ - low_);
}

std::array<double, 2> BetaHead::log_density_grad(double action) const {
  using boost::math::digamma;
  const double y = unit(action);
  const double psi_sum = digamma(alpha_ + beta_);
  return {std::log(y) - digamma(alpha_) + psi_sum, std::log1p(-y) - digamma(beta_) + psi_sum};
}

double BetaHead::entropy() const {
  using boost::math::digamma;
  const double log_norm = std::lgamma(alpha_) + std::lgamma(beta_) - std::lgamma(alpha_ + beta_);
  return log_norm - (alpha_ - 1.0) * digamma(alpha_) - (beta_ - 1.0) * digamma(beta_) +
         (alpha_ + beta_ - 2.0) * digamma(alpha_ + beta_) + std::log(high_ - low_);
}

std::array<double, 2> BetaHead::entropy_grad() const {
  using boost::math::trigamma;
  const double t_sum = trigamma(alpha_ + beta_);
  return {-(alpha_ - 1.0) * trigamma(alpha_) + (alpha_ + beta_ - 2.0) * t_sum,
          -(beta_ - 1.0) * trigamma(beta_) + (alpha_ + beta_ - 2.0) * t_sum};
}

double BetaHead::sample(Rng& rng) const {
  std::gamma_distribution<double> ga(alpha_, 1.0);
  std::gamma_distribution<double> gb(beta_, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  const double u = x / (x + y);
  return low_ + (high_ - low_) * u;
}

std::array<double, 2> beta_raw_grad(double raw_alpha, double raw_beta,
                                    const std::array<double, 2>& param_grad) {
  return {param_grad[0] * sigmoid(raw_alpha), param_grad[1] * sigmoid(raw_beta)};
}

}  // namespace orl::nn
