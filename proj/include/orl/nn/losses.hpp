#pragma once

#include <span>

#include "orl/nn/mlp.hpp"

namespace orl::nn {

/// Loss value plus its gradient with respect to the network outputs it was
/// computed from. Every loss here is a mean over the batch rows.
struct LossResult {
  double value = 0.0;
  Matrix grad;
};

/// 0.5·mean((out[i, col_i] − target_i)²). An empty `cols` selects column 0.
LossResult bellman_mse(const Matrix& out, std::span<const int> cols, const Vector& target);

/// mean(|τ − 1[u < 0]|·u²) with u = target − out[:, 0].
LossResult expectile_loss(const Matrix& out, const Vector& target, double tau);

/// Weighted mean of −log softmax(logits_i)[a_i]; `weights` may be null (all ones).
LossResult cross_entropy(const Matrix& logits, std::span<const int> actions,
                         const Vector* weights = nullptr);

/// −weight·mean(H(softmax(logits_i))). Adding it to a loss rewards entropy.
LossResult categorical_entropy_bonus(const Matrix& logits, double weight);

/// Weighted mean Beta negative log-likelihood. `raw` holds the two pre-softplus
/// outputs per row; actions are in [low, high] units.
LossResult beta_nll(const Matrix& raw, const Vector& actions, double low, double high,
                    const Vector* weights = nullptr);

/// −weight·mean(H(Beta_i)).
LossResult beta_entropy_bonus(const Matrix& raw, double low, double high, double weight);

/// Conservative penalty mean(logsumexp(candidates_i) − data_q_i).
struct LogSumExpPenalty {
  double value = 0.0;
  Matrix candidates_grad;
  Vector data_grad;
};
LogSumExpPenalty logsumexp_penalty(const Matrix& candidates, const Vector& data_q);

/// Discrete form: candidates are all action values of `q`, data column chosen by `actions`.
LossResult logsumexp_gap(const Matrix& q, std::span<const int> actions);

double logsumexp(const Eigen::Ref<const Vector>& v);
Matrix softmax_rows(const Matrix& logits);
Matrix log_softmax_rows(const Matrix& logits);

}  // namespace orl::nn
