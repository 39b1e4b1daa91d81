#include "orl/nn/losses.hpp"

#include <cmath>

#include "orl/errors.hpp"
#include "orl/nn/beta_head.hpp"

namespace orl::nn {

namespace {

void check_rows(Eigen::Index rows, std::size_t n, const char* what) {
  if (rows == 0) throw ConfigError(std::string(what) + ": empty batch");
  if (static_cast<std::size_t>(rows) != n) throw ConfigError(std::string(what) + ": batch size mismatch");
}

int column_of(std::span<const int> cols, Eigen::Index i, Eigen::Index ncols) {
  const int c = cols.empty() ? 0 : cols[static_cast<std::size_t>(i)];
  if (c < 0 || c >= ncols) throw ConfigError("action index out of range");
  return c;
}

}  // namespace

double logsumexp(const Eigen::Ref<const Vector>& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const Vector row = logits.row(i).transpose();
    out.row(i) = (row.array() - logsumexp(row)).matrix().transpose();
  }
  return out;
}

Matrix softmax_rows(const Matrix& logits) { return log_softmax_rows(logits).array().exp(); }

LossResult bellman_mse(const Matrix& out, std::span<const int> cols, const Vector& target) {
  check_rows(out.rows(), static_cast<std::size_t>(target.size()), "bellman_mse");
  if (!cols.empty()) check_rows(out.rows(), cols.size(), "bellman_mse");
  const double n = static_cast<double>(out.rows());
  LossResult r{0.0, Matrix::Zero(out.rows(), out.cols())};
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const int c = column_of(cols, i, out.cols());
    const double d = out(i, c) - target(i);
    r.value += 0.5 * d * d / n;
    r.grad(i, c) = d / n;
  }
  return r;
}

LossResult expectile_loss(const Matrix& out, const Vector& target, double tau) {
  check_rows(out.rows(), static_cast<std::size_t>(target.size()), "expectile_loss");
  const double n = static_cast<double>(out.rows());
  LossResult r{0.0, Matrix::Zero(out.rows(), out.cols())};
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double u = target(i) - out(i, 0);
    const double w = u < 0.0 ? 1.0 - tau : tau;
    r.value += w * u * u / n;
    r.grad(i, 0) = -2.0 * w * u / n;
  }
  return r;
}

LossResult cross_entropy(const Matrix& logits, std::span<const int> actions, const Vector* weights) {
  check_rows(logits.rows(), actions.size(), "cross_entropy");
  if (weights) check_rows(logits.rows(), static_cast<std::size_t>(weights->size()), "cross_entropy");
  const double n = static_cast<double>(logits.rows());
  const Matrix logp = log_softmax_rows(logits);
  LossResult r{0.0, logp.array().exp()};
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int a = column_of(actions, i, logits.cols());
    const double w = weights ? (*weights)(i) : 1.0;
    r.value -= w * logp(i, a) / n;
    r.grad.row(i) *= w / n;
    r.grad(i, a) -= w / n;
  }
  return r;
}

LossResult categorical_entropy_bonus(const Matrix& logits, double weight) {
  const double n = static_cast<double>(logits.rows());
  const Matrix logp = log_softmax_rows(logits);
  const Matrix p = logp.array().exp();
  LossResult r{0.0, Matrix::Zero(logits.rows(), logits.cols())};
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double h = -(p.row(i).array() * logp.row(i).array()).sum();
    r.value -= weight * h / n;
    // ∂H/∂z_j = −p_j (log p_j + H)
    for (Eigen::Index j = 0; j < logits.cols(); ++j)
      r.grad(i, j) = weight * p(i, j) * (logp(i, j) + h) / n;
  }
  return r;
}

LossResult beta_nll(const Matrix& raw, const Vector& actions, double low, double high,
                    const Vector* weights) {
  if (raw.cols() != 2) throw ConfigError("beta_nll: expected two raw outputs per row");
  check_rows(raw.rows(), static_cast<std::size_t>(actions.size()), "beta_nll");
  if (weights) check_rows(raw.rows(), static_cast<std::size_t>(weights->size()), "beta_nll");
  const double n = static_cast<double>(raw.rows());
  LossResult r{0.0, Matrix::Zero(raw.rows(), 2)};
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    const auto head = BetaHead::from_raw(raw(i, 0), raw(i, 1), low, high);
    const double w = weights ? (*weights)(i) : 1.0;
    r.value -= w * head.log_density(actions(i)) / n;
    const auto g = beta_raw_grad(raw(i, 0), raw(i, 1), head.log_density_grad(actions(i)));
    r.grad(i, 0) = -w * g[0] / n;
    r.grad(i, 1) = -w * g[1] / n;
  }
  return r;
}

LossResult beta_entropy_bonus(const Matrix& raw, double low, double high, double weight) {
  if (raw.cols() != 2) throw ConfigError("beta_entropy_bonus: expected two raw outputs per row");
  const double n = static_cast<double>(raw.rows());
  LossResult r{0.0, Matrix::Zero(raw.rows(), 2)};
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    const auto head = BetaHead::from_raw(raw(i, 0), raw(i, 1), low, high);
    r.value -= weight * head.entropy() / n;
    const auto g = beta_raw_grad(raw(i, 0), raw(i, 1), head.entropy_grad());
    r.grad(i, 0) = -weight * g[0] / n;
    r.grad(i, 1) = -weight * g[1] / n;
  }
  return r;
}

LogSumExpPenalty logsumexp_penalty(const Matrix& candidates, const Vector& data_q) {
  check_rows(candidates.rows(), static_cast<std::size_t>(data_q.size()), "logsumexp_penalty");
  const double n = static_cast<double>(candidates.rows());
  LogSumExpPenalty r{0.0, softmax_rows(candidates) / n, Vector::Constant(data_q.size(), -1.0 / n)};
  for (Eigen::Index i = 0; i < candidates.rows(); ++i)
    r.value += (logsumexp(candidates.row(i).transpose()) - data_q(i)) / n;
  return r;
}

LossResult logsumexp_gap(const Matrix& q, std::span<const int> actions) {
  check_rows(q.rows(), actions.size(), "logsumexp_gap");
  Vector data(q.rows());
  for (Eigen::Index i = 0; i < q.rows(); ++i) data(i) = q(i, column_of(actions, i, q.cols()));
  auto p = logsumexp_penalty(q, data);
  LossResult r{p.value, std::move(p.candidates_grad)};
  for (Eigen::Index i = 0; i < q.rows(); ++i) r.grad(i, actions[static_cast<std::size_t>(i)]) += p.data_grad(i);
  return r;
}

}  // namespace orl::nn
