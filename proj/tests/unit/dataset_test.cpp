#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "orl/data/dataset.hpp"
#include "orl/data/orld.hpp"
#include "orl/env/glucose.hpp"
#include "orl/env/gridworld.hpp"
#include "orl/errors.hpp"
#include "orl/experts/experts.hpp"
#include "test_support.hpp"

using namespace orl;
using namespace orl::data;
using orl::testing::make_episode;
using orl::testing::make_log;

namespace {

double reward_sum(const TransitionSet& s) {
  double sum = 0.0;
  for (const auto& r : s.records) sum += r.reward;
  return sum;
}

AtomicLog glucose_log(std::size_t steps, std::uint64_t seed) {
  env::GlucoseEnv env(env::select_split(env::make_cohorts(3), env::Split::Train), env::Mode::Irregular);
  experts::GlucosePdExpert expert(0.5, experts::PdGains{}, seed);
  return collect(env, expert, steps, seed);
}

}  // namespace

TEST(Collect, ZeroStepsGivesEmptyLog) {
  env::GridWorld g(env::Mode::Irregular);
  experts::GridBfsExpert e(0.3, 1);
  const auto log = collect(g, e, 0, 1);
  EXPECT_TRUE(log.episodes.empty());
  EXPECT_EQ(log.base_steps(), 0u);
}

TEST(Collect, GridLogIsValidAndHeld) {
  env::GridWorld g(env::Mode::Irregular);
  experts::GridBfsExpert e(0.3, 2);
  const auto log = collect(g, e, 2000, 2);
  EXPECT_GE(log.base_steps(), 2000u);
  EXPECT_NO_THROW(validate(log));
  for (const auto& ep : log.episodes)
    for (std::size_t i = 1; i < ep.records.size(); ++i)
      if (!ep.records[i].decision) EXPECT_EQ(ep.records[i].action, ep.records[i - 1].action);
}

TEST(Collect, GlucoseMeanHold) {
  const auto log = glucose_log(20000, 3);
  EXPECT_NO_THROW(validate(log));
  // decisions cut short by the episode end are excluded
  double total = 0.0;
  int count = 0;
  for (const auto& ep : log.episodes) {
    int start = 0;
    for (std::size_t i = 1; i < ep.records.size(); ++i) {
      if (ep.records[i].decision) {
        total += static_cast<double>(i) - start;
        ++count;
        start = static_cast<int>(i);
      }
    }
  }
  EXPECT_NEAR(total / count, 6.5, 0.2);
}

TEST(Validate, RejectsMalformedLogs) {
  auto ok = make_log({make_episode({2, 1}, {0, 0, 1})});
  EXPECT_NO_THROW(validate(ok));
  auto no_flag = ok;
  no_flag.episodes[0].records[0].decision = false;
  EXPECT_THROW(validate(no_flag), FormatError);
  auto drift = ok;
  drift.episodes[0].records[1].action = {3.0};
  EXPECT_THROW(validate(drift), FormatError);
  auto early_done = ok;
  early_done.episodes[0].records[0].done = true;
  EXPECT_THROW(validate(early_done), FormatError);
  EXPECT_THROW(to_unprocessed(drift, 0.99), FormatError);
}

TEST(Unprocessed, AccruedRewardAndDt) {
  const auto log = make_log({make_episode({1, 3}, {0, 0, 0, 1})});
  const auto s = to_unprocessed(log, 0.99);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.records[1].dt, 3);
  EXPECT_NEAR(s.records[1].reward, 0.9801, 1e-15);
  EXPECT_TRUE(s.records[1].done);
  EXPECT_FALSE(s.records[0].done);
  EXPECT_EQ(s.records[0].next_obs, s.records[1].obs);
  EXPECT_EQ(s.records[1].next_obs, log.episodes[0].final_obs);
}

TEST(Unprocessed, CountEqualsDecisions) {
  env::GridWorld g(env::Mode::Irregular);
  experts::GridBfsExpert e(0.3, 4);
  const auto log = collect(g, e, 3000, 4);
  EXPECT_EQ(to_unprocessed(log, 0.99).size(), log.decisions());
  EXPECT_EQ(to_interpolated(log).size(), log.base_steps());
}

TEST(Unprocessed, ReducesToInterpolatedWhenEveryHoldIsOne) {
  const auto log = make_log({make_episode({1, 1, 1, 1}, {0, 0.5, 0, 1}), make_episode({1, 1}, {0, 0})});
  const auto u = to_unprocessed(log, 0.99);
  const auto i = to_interpolated(log);
  ASSERT_EQ(u.size(), i.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    EXPECT_EQ(u.records[k].obs, i.records[k].obs);
    EXPECT_EQ(u.records[k].action, i.records[k].action);
    EXPECT_EQ(u.records[k].reward, i.records[k].reward);
    EXPECT_EQ(u.records[k].next_obs, i.records[k].next_obs);
    EXPECT_EQ(u.records[k].done, i.records[k].done);
  }
}

TEST(Interpolated, HeldDecisionBecomesIndependentSteps) {
  const auto log = make_log({make_episode({6}, {1, 2, 3, 4, 5, 6}, 2, {0.3})});
  const auto s = to_interpolated(log);
  ASSERT_EQ(s.size(), 6u);
  for (const auto& r : s.records) {
    EXPECT_EQ(r.action[0], 0.3);
    EXPECT_EQ(r.dt, 1);
  }
  EXPECT_EQ(reward_sum(s), 21.0);
}

TEST(Binned, ConstantObservationAndRewardSum) {
  auto ep = make_episode({12}, std::vector<double>(12, 1.0), 2, {0.1});
  for (auto& r : ep.records) r.obs = {0.7, 0.2};
  ep.final_obs = {0.7, 0.2};
  const auto s = to_binned(make_log({ep}, false), 12);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_DOUBLE_EQ(s.records[0].obs[0], 0.7);
  EXPECT_DOUBLE_EQ(s.records[0].next_obs[1], 0.2);
  EXPECT_DOUBLE_EQ(s.records[0].reward, 12.0);
  EXPECT_EQ(s.records[0].dt, 12);
}

TEST(Binned, SpikeIsDampened) {
  std::vector<double> acts(12, 0.0);
  acts[4] = 0.5;
  const auto ep = make_episode(std::vector<int>(12, 1), std::vector<double>(12, 0.0), 2, acts);
  const auto s = to_binned(make_log({ep}, false), 12);
  EXPECT_NEAR(s.records[0].action[0], 0.5 / 12.0, 1e-15);
  EXPECT_NEAR(s.records[0].action[0], 0.0417, 1e-4);
}

TEST(Binned, WindowAlignment) {
  // obs[0] = t, so window means are easy to compute by hand
  const auto ep = make_episode({24}, std::vector<double>(24, 0.0), 2, {0.2});
  const auto s = to_binned(make_log({ep}, false), 12);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_DOUBLE_EQ(s.records[0].obs[0], 0.0);             // prefix {0}
  EXPECT_DOUBLE_EQ(s.records[0].next_obs[0], 6.5);        // (0, 12]
  EXPECT_DOUBLE_EQ(s.records[1].obs[0], 6.5);             // (0, 12]
  EXPECT_DOUBLE_EQ(s.records[1].next_obs[0], 18.5);       // (12, 24]
  EXPECT_TRUE(s.records[1].done);
}

TEST(Binned, ShortEpisodeGivesOneTruncatedBin) {
  const auto ep = make_episode({5}, {1, 1, 1, 1, 1}, 2, {0.1});
  const auto s = to_binned(make_log({ep}, false), 12);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s.records[0].reward, 5.0);
  EXPECT_EQ(s.records[0].dt, 12);
  EXPECT_TRUE(s.records[0].done);
}

TEST(Subsample, StrideOneIsInterpolated) {
  const auto log = make_log({make_episode({2, 3, 1}, {0, 0, 1, 0, 0, 1})});
  const auto a = to_binned_subsample(log, 1);
  const auto b = to_interpolated(log);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a.records[k].obs, b.records[k].obs);
    EXPECT_EQ(a.records[k].reward, b.records[k].reward);
    EXPECT_EQ(a.records[k].next_obs, b.records[k].next_obs);
  }
}

TEST(Subsample, TenStepsStrideTwo) {
  std::vector<double> r(10, 0.0);
  r[8] = 1.0;  // goal on an odd step (t = 9 in 1-based counting)
  const auto s = to_binned_subsample(make_log({make_episode(std::vector<int>(10, 1), r)}), 2);
  ASSERT_EQ(s.size(), 5u);
  EXPECT_EQ(s.records[4].reward, 1.0);
  EXPECT_EQ(reward_sum(s), 1.0);
  EXPECT_EQ(s.records[2].obs[0], 4.0);
  EXPECT_EQ(s.records[2].next_obs[0], 6.0);
}

TEST(Conservation, TotalRewardAgreesAtUnitDiscount) {
  const auto log = glucose_log(6000, 5);
  const double total = reward_sum(to_interpolated(log));
  EXPECT_NEAR(reward_sum(to_unprocessed(log, 1.0)), total, 1e-6 * std::abs(total));
  EXPECT_NEAR(reward_sum(to_binned(log, 12)), total, 1e-6 * std::abs(total));
  EXPECT_NEAR(reward_sum(to_binned(log, 24)), total, 1e-6 * std::abs(total));
  const auto binned = to_binned(log, 12);
  const double expected = static_cast<double>(log.base_steps()) / 12.0;
  EXPECT_NEAR(static_cast<double>(binned.size()), expected, static_cast<double>(log.episodes.size()));
}

TEST(Standardise, TwoPoints) {
  auto s = to_interpolated(make_log({make_episode({1, 1}, {0, 2})}));
  standardise_rewards(s);
  EXPECT_DOUBLE_EQ(s.records[0].reward, -1.0);
  EXPECT_DOUBLE_EQ(s.records[1].reward, 1.0);
  EXPECT_DOUBLE_EQ(s.reward_mean, 1.0);
  EXPECT_DOUBLE_EQ(s.reward_std, 1.0);
  EXPECT_DOUBLE_EQ(s.raw_reward(s.records[1].reward), 2.0);
}

TEST(Standardise, TrainConstantsOnTestSet) {
  auto train = to_interpolated(make_log({make_episode({1, 1, 1}, {0, 1, 2})}));
  auto test = to_interpolated(make_log({make_episode({1, 1}, {5, 7})}));
  standardise_rewards(train, {&test});
  EXPECT_NEAR(reward_stats(train).mean, 0.0, 1e-15);
  EXPECT_NEAR(reward_stats(train).std, 1.0, 1e-15);
  EXPECT_GT(reward_stats(test).mean, 1.0);
  EXPECT_NEAR(test.raw_reward(test.records[1].reward), 7.0, 1e-12);
}

TEST(Standardise, IdempotentOnOwnStatistics) {
  auto s = to_interpolated(make_log({make_episode({1, 1, 1, 1}, {0.3, -4, 2, 9})}));
  standardise_rewards(s);
  const auto once = s;
  standardise_rewards(s);
  for (std::size_t k = 0; k < s.size(); ++k) EXPECT_NEAR(s.records[k].reward, once.records[k].reward, 1e-12);
  EXPECT_NEAR(s.raw_reward(s.records[1].reward), -4.0, 1e-12);
}

TEST(Standardise, ZeroVarianceRejected) {
  auto s = to_interpolated(make_log({make_episode({1, 1}, {3, 3})}));
  EXPECT_THROW(standardise_rewards(s), ConfigError);
}

TEST(Orld, RoundTripBitExact) {
  const auto log = glucose_log(1000, 6);
  auto set = to_unprocessed(log, 0.99);
  standardise_rewards(set);
  // the on-disk format is f32, so narrow first and expect an exact round trip
  for (auto& r : set.records) {
    for (auto& v : r.obs) v = static_cast<float>(v);
    for (auto& v : r.next_obs) v = static_cast<float>(v);
    for (auto& v : r.action) v = static_cast<float>(v);
    r.reward = static_cast<float>(r.reward);
  }
  std::stringstream ss;
  write_orld(ss, set);
  const auto back = read_orld(ss);
  ASSERT_EQ(back.size(), set.size());
  EXPECT_EQ(back.variant, set.variant);
  EXPECT_EQ(back.discrete, false);
  EXPECT_EQ(back.reward_mean, set.reward_mean);
  EXPECT_EQ(back.reward_std, set.reward_std);
  for (std::size_t k = 0; k < set.size(); ++k) {
    EXPECT_EQ(back.records[k].obs, set.records[k].obs);
    EXPECT_EQ(back.records[k].next_obs, set.records[k].next_obs);
    EXPECT_EQ(back.records[k].action, set.records[k].action);
    EXPECT_EQ(back.records[k].reward, set.records[k].reward);
    EXPECT_EQ(back.records[k].dt, set.records[k].dt);
    EXPECT_EQ(back.records[k].done, set.records[k].done);
    EXPECT_EQ(back.records[k].episode, set.records[k].episode);
  }
}

TEST(Orld, FileRoundTripKeepsProvenanceAndWidth) {
  orl::testing::TempDir dir("orld");
  auto set = to_binned(glucose_log(800, 7), 24);
  set.provenance.source = "unit";
  set.provenance.seed = 0xFFFFFFFFFFFFFFF1ULL;
  const auto path = dir.path() / "b.orld";
  save_dataset(path, set);
  const auto back = load_dataset(path);
  EXPECT_EQ(back.bin_width, 24);
  EXPECT_EQ(back.provenance.source, "unit");
  EXPECT_EQ(back.provenance.seed, set.provenance.seed);
  EXPECT_DOUBLE_EQ(back.provenance.gamma, set.provenance.gamma);
}

TEST(Orld, RejectsCorruptInput) {
  std::stringstream bad("ORLX");
  EXPECT_THROW(read_orld(bad), FormatError);
  auto set = to_interpolated(make_log({make_episode({1, 1}, {0, 1})}));
  std::stringstream ss;
  write_orld(ss, set);
  std::string bytes = ss.str();
  bytes.resize(bytes.size() - 3);
  std::stringstream truncated(bytes);
  EXPECT_THROW(read_orld(truncated), FormatError);
}

TEST(CausalReversal, SyntheticEvent) {
  // carb at t=5, action change at t=7
  std::vector<double> acts(24, 0.02);
  for (int t = 7; t < 24; ++t) acts[static_cast<std::size_t>(t)] = 0.1;
  auto ep = make_episode(std::vector<int>(24, 1), std::vector<double>(24, 0.0), 5, acts);
  ep.records[5].obs[4] = 0.4;
  const auto log = make_log({ep}, false, 5);
  const auto events = detect_causal_reversal(log, 12, 4);
  ASSERT_EQ(events.size(), 1u);
  EXPECT_EQ(events[0].event_step, 5);
  EXPECT_EQ(events[0].action_step, 7);
  EXPECT_EQ(events[0].action_bin, 0);
  EXPECT_EQ(events[0].observation_bin, 1);
  // the binned view shows the action rise in bin 0 and the carbs only from bin 1
  const auto binned = to_binned(log, 12);
  EXPECT_GT(binned.records[0].action[0], 0.02);
  EXPECT_EQ(binned.records[0].obs[4], 0.0);
  EXPECT_GT(binned.records[1].obs[4], 0.0);
  EXPECT_TRUE(detect_causal_reversal(log, 1, 4).empty());
}

TEST(CausalReversal, NoneWhenUnitWidthOnRealLog) {
  const auto log = glucose_log(5000, 8);
  EXPECT_TRUE(detect_causal_reversal(log, 1, env::kCarbFeature).empty());
}
