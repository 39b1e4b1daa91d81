#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "orl/env/gridworld.hpp"
#include "orl/errors.hpp"
#include "orl/eval/stats.hpp"

using namespace orl;
using namespace orl::eval;

namespace {

// IQM as twice the integral of the empirical quantile step function over
// [1/4, 3/4], by midpoint sums.
double iqm_integral(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const int steps = 400000;
  double sum = 0.0;
  for (int k = 0; k < steps; ++k) {
    const double u = 0.25 + (k + 0.5) * 0.5 / steps;
    sum += v[static_cast<std::size_t>(u * static_cast<double>(v.size()))];
  }
  return sum / steps;
}

// Three-step episodes paying 1 per step; the listed episode indices abort.
class CountingEnv final : public env::Environment {
 public:
  explicit CountingEnv(std::set<int> failing) : env::Environment(env::Mode::Regular), failing_(std::move(failing)) {}
  env::EnvKind kind() const override { return env::EnvKind::Grid; }
  std::size_t obs_dim() const override { return 1; }
  bool discrete() const override { return true; }
  std::size_t action_count() const override { return 2; }
  double action_low() const override { return 0.0; }
  double action_high() const override { return 1.0; }
  env::Observation reset(std::uint64_t) override {
    ++episode_;
    t_ = 0;
    return {0.0};
  }
  env::BaseStep step(double) override {
    if (failing_.count(episode_)) throw SimulationError("scripted failure");
    ++t_;
    return {{static_cast<double>(t_)}, 1.0, t_ >= 3};
  }
  bool done() const override { return t_ >= 3; }

 private:
  int draw_irregular_interval() override { return 1; }
  std::set<int> failing_;
  int episode_ = -1;
  int t_ = 0;
};

class ZeroController final : public env::Controller {
 public:
  void begin_episode() override {}
  double act(const env::Environment&, const env::Observation&, int) override { return 0.0; }
};

RunScore run_of(std::vector<double> returns, std::vector<int> strata = {}) {
  RunScore r;
  if (strata.empty()) strata.assign(returns.size(), 0);
  r.returns = std::move(returns);
  r.strata = std::move(strata);
  return r;
}

}  // namespace

TEST(Iqm, SmallExamples) {
  const std::vector<double> a{1, 2, 3, 4, 5, 6, 7, 8};
  EXPECT_DOUBLE_EQ(iqm(a), 4.5);
  const std::vector<double> b{1, 2, 3, 4, 100};
  EXPECT_DOUBLE_EQ(iqm(b), 3.0);
  const std::vector<double> c{7};
  EXPECT_DOUBLE_EQ(iqm(c), 7.0);
  EXPECT_THROW(iqm(std::vector<double>{}), ConfigError);
}

TEST(Iqm, MatchesQuantileIntegral) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 3.0);
  for (std::size_t size : {3u, 5u, 6u, 7u, 10u, 13u, 31u}) {
    std::vector<double> v(size);
    for (auto& x : v) x = n(rng);
    EXPECT_NEAR(iqm(v), iqm_integral(v), 1e-4) << size;
  }
}

TEST(Iqm, PermutationInvariant) {
  std::vector<double> v{5, -1, 3.5, 8, 0, 2, 2, 9, -4};
  const double ref = iqm(v);
  std::mt19937_64 rng(1);
  for (int k = 0; k < 20; ++k) {
    std::shuffle(v.begin(), v.end(), rng);
    EXPECT_DOUBLE_EQ(iqm(v), ref);
  }
}

TEST(Iqm, ExponentialSampleSitsBetweenMedianAndMean) {
  std::mt19937_64 rng(2);
  std::exponential_distribution<double> e(1.0);
  std::vector<double> v(100000);
  for (auto& x : v) x = e(rng);
  const double m = iqm(v);
  // 2∫_{1/4}^{3/4} −ln(1−u) du
  const double exact = 2.0 * ((0.75 - 0.75 * std::log(0.75)) - (0.25 - 0.25 * std::log(0.25)));
  EXPECT_NEAR(m, exact, 0.01);
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_LT(quantile_sorted(sorted, 0.5), m);
  EXPECT_LT(m, std::accumulate(v.begin(), v.end(), 0.0) / v.size());
}

TEST(Quantile, LinearInterpolation) {
  const std::vector<double> s{0, 10};
  EXPECT_DOUBLE_EQ(quantile_sorted(s, 0.25), 2.5);
  EXPECT_DOUBLE_EQ(quantile_sorted(s, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(s, 1.0), 10.0);
  const std::vector<double> t{1, 2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(quantile_sorted(t, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(t, 0.1), 1.4);
}

TEST(Bootstrap, ConstantDataGivesZeroWidth) {
  const std::vector<double> v(50, 3.25);
  const auto ci = bootstrap_ci(v, 500);
  EXPECT_DOUBLE_EQ(ci.low, 3.25);
  EXPECT_DOUBLE_EQ(ci.width(), 0.0);
  const auto sci = stratified_bootstrap_ci({run_of(v), run_of(v), run_of(v)}, 500);
  EXPECT_DOUBLE_EQ(sci.width(), 0.0);
}

TEST(Bootstrap, ReplicateKeepsStratumSizes) {
  std::vector<double> returns;
  std::vector<int> strata;
  for (int p = 0; p < 5; ++p)
    for (int k = 0; k < p + 2; ++k) {
      returns.push_back(100.0 * p + k);
      strata.push_back(p);
    }
  const std::vector<RunScore> runs{run_of(returns, strata)};
  Rng rng(4);
  for (int b = 0; b < 50; ++b) {
    const auto rep = bootstrap_replicate(runs, rng);
    ASSERT_EQ(rep.size(), 1u);
    std::map<int, int> counts;
    for (std::size_t i = 0; i < rep[0].returns.size(); ++i) {
      ++counts[rep[0].strata[i]];
      // values never cross strata
      EXPECT_EQ(static_cast<int>(rep[0].returns[i] / 100.0), rep[0].strata[i]);
    }
    for (int p = 0; p < 5; ++p) EXPECT_EQ(counts[p], p + 2);
  }
}

TEST(Bootstrap, SingleRunIntervalMatchesNormalTheory) {
  std::mt19937_64 g(5);
  std::normal_distribution<double> n(2.0, 1.0);
  std::vector<double> v(400);
  for (auto& x : v) x = n(g);
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double se = std::sqrt(ss / v.size()) / std::sqrt(static_cast<double>(v.size()));
  const auto ci = stratified_bootstrap_ci({run_of(v)}, 10000, 0.95, 1);
  EXPECT_NEAR(ci.width(), 2.0 * 1.959964 * se, 0.05 * 2.0 * 1.959964 * se);
  EXPECT_LT(ci.low, mean);
  EXPECT_GT(ci.high, mean);
}

TEST(Bootstrap, DeterministicPerSeedAndBracketsEstimate) {
  std::vector<RunScore> runs;
  std::mt19937_64 g(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int r = 0; r < 5; ++r) {
    std::vector<double> v(30);
    for (auto& x : v) x = u(g) + 0.1 * r;
    runs.push_back(run_of(v));
  }
  const auto a = stratified_bootstrap_ci(runs, 2000, 0.95, 11);
  const auto b = stratified_bootstrap_ci(runs, 2000, 0.95, 11);
  EXPECT_EQ(a.low, b.low);
  EXPECT_EQ(a.high, b.high);
  const double point = aggregate_iqm(runs);
  EXPECT_LE(a.low, point);
  EXPECT_GE(a.high, point);
  EXPECT_THROW(stratified_bootstrap_ci({}, 10), ConfigError);
  EXPECT_THROW(bootstrap_ci(std::vector<double>{1.0}, 0), ConfigError);
  EXPECT_THROW(bootstrap_ci(std::vector<double>{1.0}, 10, 1.0), ConfigError);
}

TEST(Normalise, AnchorsMapToZeroAndOne) {
  EXPECT_DOUBLE_EQ(normalise_score(0.2, 0.2, 0.9), 0.0);
  EXPECT_DOUBLE_EQ(normalise_score(0.9, 0.2, 0.9), 1.0);
  EXPECT_DOUBLE_EQ(normalise_score(1.6, 0.2, 0.9), 2.0);
  EXPECT_DOUBLE_EQ(normalise_score(-30.0, -40.0, 10.0), 0.2);
  EXPECT_THROW(normalise_score(1.0, 0.5, 0.5), DomainError);
  EXPECT_THROW(normalise_score(1.0, 0.5, std::nan("")), DomainError);
}

TEST(Calibration, GapIsPredictedMinusTrue) {
  const auto rows = calibration_table({{"c1", "iql", "binned", 0.4, 0.7}, {"c2", "cql", "unprocessed", 0.9, 0.5}});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_DOUBLE_EQ(rows[0].gap, 0.3);
  EXPECT_NEAR(rows[1].gap, -0.4, 1e-15);
  EXPECT_EQ(rows[1].algorithm, "cql");
}

TEST(RolloutEval, CountsReturnsAndExcludesAborts) {
  ZeroController c;
  Protocol p;
  p.grid_episodes = 100;
  CountingEnv ok({});
  const auto s = rollout_eval(ok, c, p, 1);
  EXPECT_EQ(s.returns.size(), 100u);
  EXPECT_DOUBLE_EQ(s.mean(), 3.0);
  EXPECT_EQ(s.excluded, 0);

  CountingEnv few({3, 50});
  const auto t = rollout_eval(few, c, p, 1);
  EXPECT_EQ(t.returns.size(), 98u);
  EXPECT_EQ(t.excluded, 2);

  std::set<int> many;
  for (int i = 0; i < 10; ++i) many.insert(i * 7);
  CountingEnv bad(many);
  EXPECT_THROW(rollout_eval(bad, c, p, 1), SimulationError);
}

TEST(RolloutEval, RandomGridAnchorIsDeterministic) {
  env::GridWorld g(env::Mode::Irregular);
  Protocol p;
  p.grid_episodes = 30;
  env::RandomController a(7), b(7);
  const auto x = rollout_eval(g, a, p, 3);
  const auto y = rollout_eval(g, b, p, 3);
  EXPECT_EQ(x.returns, y.returns);
  for (double r : x.returns) EXPECT_TRUE(r == 0.0 || r == 1.0);
  EXPECT_EQ(x.mode, env::Mode::Irregular);
}
