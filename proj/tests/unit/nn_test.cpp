#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "orl/errors.hpp"
#include "orl/nn/beta_head.hpp"
#include "orl/nn/checkpoint.hpp"
#include "orl/nn/losses.hpp"
#include "orl/nn/mlp.hpp"

using namespace orl;
using namespace orl::nn;

namespace {

NetParams single_layer(Matrix w, Vector b) {
  NetParams p;
  p.layers.push_back({std::move(w), std::move(b)});
  Rng rng(0);
  auto tmp = make_mlp({p.input_dim(), p.output_dim()}, rng);
  p.adam = tmp.adam;
  return p;
}

// Scalar loss sum_ij c_ij * out_ij for fixed random c, so dL/dout = c.
double weighted_sum(const NetParams& p, const Matrix& x, const Matrix& c) {
  return (mlp_forward(p, x).array() * c.array()).sum();
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-6, std::abs(a) + std::abs(b)); }

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = 2.0 * uniform01(rng) - 1.0;
  return m;
}

}  // namespace

TEST(Mlp, IdentityLayer) {
  const auto p = single_layer(Matrix::Identity(2, 2), Vector::Zero(2));
  const Vector y = mlp_forward(p, Vector{{1.0, 2.0}});
  EXPECT_DOUBLE_EQ(y(0), 1.0);
  EXPECT_DOUBLE_EQ(y(1), 2.0);
}

TEST(Mlp, ZeroWeightsGiveBias) {
  const auto p = single_layer(Matrix::Zero(1, 3), Vector::Constant(1, 3.0));
  EXPECT_DOUBLE_EQ(mlp_forward(p, Vector{{5.0, -2.0, 9.0}})(0), 3.0);
}

TEST(Mlp, ForwardMatchesStraightLineEvaluation) {
  Rng rng(0);
  const auto p = make_mlp({3, 4, 1}, rng);
  const double x[3] = {0.3, -1.2, 0.7};
  double out = p.layers[1].bias(0);
  for (int j = 0; j < 4; ++j) {
    double z = p.layers[0].bias(j);
    for (int k = 0; k < 3; ++k) z += p.layers[0].weight(j, k) * x[k];
    const double h = z >= 0.0 ? z : 0.01 * z;
    out += p.layers[1].weight(0, j) * h;
  }
  EXPECT_NEAR(mlp_forward(p, Vector{{x[0], x[1], x[2]}})(0), out, 1e-14);
}

TEST(Mlp, ScalarGradientAnalytic) {
  auto p = single_layer(Matrix::Constant(1, 1, 2.0), Vector::Zero(1));
  Matrix x(1, 1);
  x(0, 0) = 3.0;
  ForwardCache cache;
  const Matrix y = mlp_forward(p, x, &cache);
  Matrix g(1, 1);
  g(0, 0) = 2.0 * (y(0, 0) - 0.0);
  const auto r = mlp_backward(p, cache, g);
  EXPECT_DOUBLE_EQ(r.grads[0].weight(0, 0), 36.0);
}

TEST(Mlp, ZeroUpstreamGradient) {
  Rng rng(1);
  const auto p = make_mlp({4, 8, 8, 2}, rng);
  ForwardCache cache;
  const Matrix x = random_matrix(rng, 5, 4);
  mlp_forward(p, x, &cache);
  const auto r = mlp_backward(p, cache, Matrix::Zero(5, 2));
  for (const auto& l : r.grads) {
    EXPECT_EQ(l.weight.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(l.bias.cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Mlp, BackwardMatchesFiniteDifferences) {
  Rng rng(2);
  auto p = make_mlp({5, 16, 12, 3}, rng);
  const Matrix x = random_matrix(rng, 7, 5);
  const Matrix c = random_matrix(rng, 7, 3);
  ForwardCache cache;
  mlp_forward(p, x, &cache);
  const auto r = mlp_backward(p, cache, c);
  const double eps = 1e-5;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    for (Eigen::Index i = 0; i < p.layers[l].weight.size(); ++i) {
      double& w = p.layers[l].weight.data()[i];
      const double saved = w;
      w = saved + eps;
      const double up = weighted_sum(p, x, c);
      w = saved - eps;
      const double down = weighted_sum(p, x, c);
      w = saved;
      const double fd = (up - down) / (2 * eps);
      EXPECT_LT(rel_err(fd, r.grads[l].weight.data()[i]), 1e-4) << "layer " << l << " w " << i;
    }
    for (Eigen::Index i = 0; i < p.layers[l].bias.size(); ++i) {
      double& b = p.layers[l].bias(i);
      const double saved = b;
      b = saved + eps;
      const double up = weighted_sum(p, x, c);
      b = saved - eps;
      const double down = weighted_sum(p, x, c);
      b = saved;
      EXPECT_LT(rel_err((up - down) / (2 * eps), r.grads[l].bias(i)), 1e-4);
    }
  }
  // input gradient
  Matrix xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = xp.data()[i];
    xp.data()[i] = saved + eps;
    const double up = weighted_sum(p, xp, c);
    xp.data()[i] = saved - eps;
    const double down = weighted_sum(p, xp, c);
    xp.data()[i] = saved;
    EXPECT_LT(rel_err((up - down) / (2 * eps), r.input_grad.data()[i]), 1e-4);
  }
}

TEST(Mlp, BackwardWithoutForwardIsUsageError) {
  Rng rng(3);
  const auto p = make_mlp({2, 4, 1}, rng);
  EXPECT_THROW(mlp_backward(p, ForwardCache{}, Matrix::Zero(1, 1)), UsageError);
}

TEST(LeakyRelu, ValuesAndDerivative) {
  EXPECT_DOUBLE_EQ(leaky_relu(2.5), 2.5);
  EXPECT_DOUBLE_EQ(leaky_relu(-3.0), -0.03);
  EXPECT_DOUBLE_EQ(leaky_relu(0.0), 0.0);
  EXPECT_DOUBLE_EQ(leaky_relu_grad(0.0), 1.0);
  EXPECT_DOUBLE_EQ(leaky_relu_grad(1e-9), 1.0);
  EXPECT_DOUBLE_EQ(leaky_relu_grad(-1e-9), 0.01);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Rng rng(4);
  auto p = make_mlp({3, 4, 2}, rng);
  const auto before = p.layers;
  adam_step(p, zero_gradients(p), 1e-3);
  EXPECT_EQ(p.adam.step, 1u);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    EXPECT_EQ(p.layers[l].weight, before[l].weight);
    EXPECT_EQ(p.layers[l].bias, before[l].bias);
  }
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto p = single_layer(Matrix::Constant(1, 1, 0.5), Vector::Zero(1));
  auto g = zero_gradients(p);
  g[0].weight(0, 0) = 1.0;
  adam_step(p, g, 0.001);
  // bias-corrected m/sqrt(v) = 1, so the step is lr/(1 + eps)
  EXPECT_NEAR(p.layers[0].weight(0, 0), 0.5 - 0.001, 1e-10);
}

TEST(Adam, IdenticalInputsGiveIdenticalUpdates) {
  Rng r1(5), r2(5);
  auto a = make_mlp({3, 6, 2}, r1);
  auto b = make_mlp({3, 6, 2}, r2);
  Rng gr(6);
  for (int step = 0; step < 5; ++step) {
    auto g = zero_gradients(a);
    for (auto& l : g) {
      l.weight = random_matrix(gr, l.weight.rows(), l.weight.cols());
      l.bias = random_matrix(gr, l.bias.size(), 1);
    }
    adam_step(a, g, 1e-2);
    adam_step(b, g, 1e-2);
  }
  for (std::size_t l = 0; l < a.layers.size(); ++l) EXPECT_EQ(a.layers[l].weight, b.layers[l].weight);
}

TEST(Adam, NonFiniteGradientThrowsAndKeepsParameters) {
  Rng rng(7);
  auto p = make_mlp({2, 3, 1}, rng);
  const auto before = p.layers[0].weight;
  auto g = zero_gradients(p);
  g[0].weight(0, 0) = std::nan("");
  EXPECT_THROW(adam_step(p, g, 1e-3), DivergenceError);
  EXPECT_EQ(p.layers[0].weight, before);
}

TEST(Polyak, Extremes) {
  Rng rng(8);
  const auto online = make_mlp({3, 5, 2}, rng);
  auto target = make_mlp({3, 5, 2}, rng);
  const auto original = target.layers;
  polyak_update(target, online, 0.0);
  EXPECT_EQ(target.layers[0].weight, original[0].weight);
  polyak_update(target, online, 1.0);
  EXPECT_EQ(target.layers[1].weight, online.layers[1].weight);
  EXPECT_EQ(target.layers[1].bias, online.layers[1].bias);
}

TEST(Polyak, SmallStepAndGeometricDecay) {
  auto target = single_layer(Matrix::Zero(2, 2), Vector::Zero(2));
  const auto online = single_layer(Matrix::Ones(2, 2), Vector::Ones(2));
  polyak_update(target, online, 0.005);
  EXPECT_NEAR(target.layers[0].weight(1, 0), 0.005, 1e-15);
  EXPECT_NEAR(target.layers[0].bias(1), 0.005, 1e-15);
  for (int i = 1; i < 200; ++i) polyak_update(target, online, 0.005);
  EXPECT_NEAR(1.0 - target.layers[0].weight(0, 1), std::pow(0.995, 200), 1e-12);
}

TEST(ClippedDoubleQ, ScalarAndBatch) {
  EXPECT_EQ(clipped_double_q(3.0, 5.0), 3.0);
  EXPECT_EQ(clipped_double_q(-1.0, -1.0), -1.0);
  Rng rng(9);
  const Matrix a = random_matrix(rng, 6, 3);
  const Matrix b = random_matrix(rng, 6, 3);
  const Matrix m = clipped_double_q(a, b);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) EXPECT_EQ(m(i, j), clipped_double_q(a(i, j), b(i, j)));
}

TEST(Checkpoint, RoundTripIsExact) {
  Rng rng(10);
  auto p = make_mlp({4, 7, 3}, rng);
  auto g = zero_gradients(p);
  g[1].bias(2) = 0.3;
  adam_step(p, g, 1e-3);
  std::stringstream ss;
  write_checkpoint(ss, p);
  const auto q = read_checkpoint(ss);
  ASSERT_EQ(q.layers.size(), p.layers.size());
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    EXPECT_EQ(q.layers[l].weight, p.layers[l].weight);
    EXPECT_EQ(q.layers[l].bias, p.layers[l].bias);
    EXPECT_EQ(q.adam.first[l].bias, p.adam.first[l].bias);
    EXPECT_EQ(q.adam.second[l].weight, p.adam.second[l].weight);
  }
  EXPECT_EQ(q.adam.step, 1u);
}

TEST(Checkpoint, BadMagicRejected) {
  std::stringstream ss("XXXXjunk");
  EXPECT_THROW(read_checkpoint(ss), FormatError);
}

TEST(BetaHead, Means) {
  EXPECT_DOUBLE_EQ(BetaHead(3.0, 3.0, -1.0, 5.0).mean(), 2.0);
  EXPECT_DOUBLE_EQ(BetaHead(2.0, 2.0, 0.0, 0.5).mean(), 0.25);
}

TEST(BetaHead, DensityIntegratesToOne) {
  for (auto [a, b] : {std::pair{2.0, 2.0}, std::pair{1.7, 4.2}, std::pair{6.0, 1.5}}) {
    const BetaHead h(a, b, 0.0, 0.5);
    const int n = 20000;
    const double dx = 0.5 / n;
    double sum = 0.0;
    // endpoints carry zero density for alpha, beta > 1
    for (int i = 1; i < n; ++i) sum += std::exp(h.log_density(i * dx));
    EXPECT_NEAR(sum * dx, 1.0, 1e-3) << a << "," << b;
  }
}

TEST(BetaHead, EntropyMatchesQuadrature) {
  const BetaHead h(2.5, 3.5, 0.0, 0.5);
  const int n = 20000;
  const double dx = 0.5 / n;
  double sum = 0.0;
  for (int i = 1; i < n; ++i) {
    const double lp = h.log_density(i * dx);
    sum -= std::exp(lp) * lp;
  }
  EXPECT_NEAR(sum * dx, h.entropy(), 1e-3);
}

TEST(BetaHead, ParameterGradientsMatchFiniteDifferences) {
  const double a = 2.3, b = 1.8, x = 0.17, eps = 1e-6;
  const auto g = BetaHead(a, b, 0.0, 0.5).log_density_grad(x);
  const double fa = (BetaHead(a + eps, b, 0, 0.5).log_density(x) - BetaHead(a - eps, b, 0, 0.5).log_density(x)) / (2 * eps);
  const double fb = (BetaHead(a, b + eps, 0, 0.5).log_density(x) - BetaHead(a, b - eps, 0, 0.5).log_density(x)) / (2 * eps);
  EXPECT_LT(rel_err(g[0], fa), 1e-5);
  EXPECT_LT(rel_err(g[1], fb), 1e-5);
  const auto ge = BetaHead(a, b, 0.0, 0.5).entropy_grad();
  const double ea = (BetaHead(a + eps, b, 0, 0.5).entropy() - BetaHead(a - eps, b, 0, 0.5).entropy()) / (2 * eps);
  const double eb = (BetaHead(a, b + eps, 0, 0.5).entropy() - BetaHead(a, b - eps, 0, 0.5).entropy()) / (2 * eps);
  EXPECT_LT(rel_err(ge[0], ea), 1e-5);
  EXPECT_LT(rel_err(ge[1], eb), 1e-5);
}

TEST(BetaHead, FromRawIsUnimodal) {
  const auto h = BetaHead::from_raw(-30.0, -30.0, 0.0, 1.0);
  EXPECT_GT(h.alpha(), 1.0);
  EXPECT_GT(h.beta(), 1.0);
}

TEST(BetaHead, SamplesStayInRangeAndAverageToMean) {
  const BetaHead h(2.0, 5.0, 0.0, 0.5);
  Rng rng(11);
  double sum = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const double s = h.sample(rng);
    ASSERT_GE(s, 0.0);
    ASSERT_LE(s, 0.5);
    sum += s;
  }
  EXPECT_NEAR(sum / n, h.mean(), 0.002);
}

TEST(Determinism, SameSeedSameTrajectory) {
  auto run = [] {
    Rng rng(12);
    auto p = make_mlp({3, 8, 8, 1}, rng);
    Rng data(13);
    for (int s = 0; s < 20; ++s) {
      const Matrix x = random_matrix(data, 16, 3);
      const Matrix t = random_matrix(data, 16, 1);
      ForwardCache cache;
      const Matrix y = mlp_forward(p, x, &cache);
      const auto r = mlp_backward(p, cache, (y - t) / 16.0);
      adam_step(p, r.grads, 1e-2);
    }
    return p;
  };
  const auto a = run();
  const auto b = run();
  for (std::size_t l = 0; l < a.layers.size(); ++l) EXPECT_EQ(a.layers[l].weight, b.layers[l].weight);
}
