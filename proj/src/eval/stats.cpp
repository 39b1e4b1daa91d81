#include "orl/eval/stats.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>

#include "orl/env/glucose.hpp"
#include "orl/errors.hpp"

namespace orl::eval {

double RunScore::mean() const {
  if (returns.empty()) throw ConfigError("RunScore::mean: no episodes");
  return std::accumulate(returns.begin(), returns.end(), 0.0) / static_cast<double>(returns.size());
}

namespace {

// Undiscounted raw return of one episode from an already reset environment,
// or nullopt if the simulation aborted.
std::optional<double> play(env::Environment& e, env::Controller& c, env::Observation obs) {
  try {
    double total = 0.0;
    int since = 0;
    c.begin_episode();
    while (!e.done()) {
      const double action = c.act(e, obs, since);
      auto d = e.decision_step(action, 1.0);
      total += d.reward;
      since = d.dt;
      obs = std::move(d.obs);
    }
    return total;
  } catch (const SimulationError& err) {
    std::cerr << "warning: episode aborted: " << err.what() << "\n";
    return std::nullopt;
  }
}

}  // namespace

RunScore rollout_eval(env::Environment& environment, env::Controller& controller, const Protocol& protocol,
                      std::uint64_t seed) {
  RunScore s;
  s.mode = environment.mode();
  int attempted = 0;
  auto record = [&](std::optional<double> r, int stratum) {
    ++attempted;
    if (!r) {
      ++s.excluded;
      return;
    }
    s.returns.push_back(*r);
    s.strata.push_back(stratum);
  };
  if (auto* g = dynamic_cast<env::GlucoseEnv*>(&environment)) {
    const auto n = static_cast<std::uint64_t>(protocol.glucose_episodes_per_patient);
    for (std::size_t p = 0; p < g->patients().size(); ++p) {
      for (std::uint64_t k = 0; k < n; ++k) {
        auto obs = g->reset_patient(p, derive_seed(seed, stream::kEval, p * n + k));
        record(play(*g, controller, std::move(obs)), g->patients()[p].id);
      }
    }
  } else {
    for (int k = 0; k < protocol.grid_episodes; ++k) {
      auto obs = environment.reset(derive_seed(seed, stream::kEval, static_cast<std::uint64_t>(k)));
      record(play(environment, controller, std::move(obs)), 0);
    }
  }
  if (attempted == 0) throw ConfigError("rollout_eval: protocol runs no episodes");
  if (static_cast<double>(s.excluded) > protocol.max_excluded_fraction * attempted)
    throw SimulationError("rollout_eval: " + std::to_string(s.excluded) + " of " + std::to_string(attempted) +
                          " episodes aborted");
  return s;
}

double iqm(std::span<const double> values) {
  if (values.empty()) throw ConfigError("iqm: empty input");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  const double lo = n / 4.0;
  const double hi = 3.0 * n / 4.0;
  double sum = 0.0;
  double weight = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    // Element i covers [i, i+1) of the sorted mass; keep its overlap with [n/4, 3n/4).
    const double w = std::max(0.0, std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i)));
    sum += w * v[i];
    weight += w;
  }
  return sum / weight;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ConfigError("quantile: empty input");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= sorted.size()) return sorted.back();
  const double f = pos - static_cast<double>(i);
  return sorted[i] + f * (sorted[i + 1] - sorted[i]);
}

std::vector<RunScore> bootstrap_replicate(const std::vector<RunScore>& runs, Rng& rng) {
  std::vector<RunScore> out;
  out.reserve(runs.size());
  for (const auto& run : runs) {
    if (run.returns.size() != run.strata.size()) throw ConfigError("bootstrap: strata labels do not match returns");
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < run.strata.size(); ++i) groups[run.strata[i]].push_back(i);
    RunScore r;
    r.mode = run.mode;
    r.returns.reserve(run.returns.size());
    r.strata.reserve(run.strata.size());
    for (const auto& [stratum, members] : groups) {
      for (std::size_t k = 0; k < members.size(); ++k) {
        r.returns.push_back(run.returns[members[uniform_index(rng, members.size())]]);
        r.strata.push_back(stratum);
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

double aggregate_iqm(const std::vector<RunScore>& runs) {
  std::vector<double> means;
  means.reserve(runs.size());
  for (const auto& r : runs) means.push_back(r.mean());
  return iqm(means);
}

namespace {

Interval percentile_interval(std::vector<double>& stats, double level) {
  std::sort(stats.begin(), stats.end());
  const double tail = (1.0 - level) / 2.0;
  return {quantile_sorted(stats, tail), quantile_sorted(stats, 1.0 - tail)};
}

void check_bootstrap_args(int replicates, double level) {
  if (replicates < 1) throw ConfigError("bootstrap: replicates must be positive");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("bootstrap: level must lie in (0, 1)");
}

}  // namespace

Interval stratified_bootstrap_ci(const std::vector<RunScore>& runs, int replicates, double level, std::uint64_t seed) {
  check_bootstrap_args(replicates, level);
  if (runs.empty()) throw ConfigError("bootstrap: no runs");
  if (runs.size() == 1) std::cerr << "warning: bootstrap over a single run reflects episode resampling only\n";

  // Per-run stratum groups, built once.
  struct Group {
    std::vector<double> values;
  };
  std::vector<std::vector<Group>> layout(runs.size());
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& run = runs[r];
    if (run.returns.empty()) throw ConfigError("bootstrap: run without episodes");
    if (run.returns.size() != run.strata.size()) throw ConfigError("bootstrap: strata labels do not match returns");
    std::map<int, Group> groups;
    for (std::size_t i = 0; i < run.returns.size(); ++i) groups[run.strata[i]].values.push_back(run.returns[i]);
    for (auto& [k, g] : groups) layout[r].push_back(std::move(g));
  }

  std::vector<double> stats(static_cast<std::size_t>(replicates));
  std::vector<double> means(runs.size());
  for (int b = 0; b < replicates; ++b) {
    Rng rng = make_rng(seed, stream::kBootstrap, static_cast<std::uint64_t>(b));
    for (std::size_t r = 0; r < runs.size(); ++r) {
      double sum = 0.0;
      std::size_t count = 0;
      for (const auto& g : layout[r]) {
        for (std::size_t k = 0; k < g.values.size(); ++k) sum += g.values[uniform_index(rng, g.values.size())];
        count += g.values.size();
      }
      means[r] = sum / static_cast<double>(count);
    }
    stats[static_cast<std::size_t>(b)] = iqm(means);
  }
  return percentile_interval(stats, level);
}

Interval bootstrap_ci(std::span<const double> values, int replicates, double level, std::uint64_t seed) {
  check_bootstrap_args(replicates, level);
  if (values.empty()) throw ConfigError("bootstrap: empty input");
  std::vector<double> stats(static_cast<std::size_t>(replicates));
  std::vector<double> sample(values.size());
  for (int b = 0; b < replicates; ++b) {
    Rng rng = make_rng(seed, stream::kBootstrap, static_cast<std::uint64_t>(b));
    for (auto& x : sample) x = values[uniform_index(rng, values.size())];
    stats[static_cast<std::size_t>(b)] = iqm(sample);
  }
  return percentile_interval(stats, level);
}

double normalise_score(double raw, double random_anchor, double top_anchor) {
  if (!(top_anchor != random_anchor) || !std::isfinite(top_anchor) || !std::isfinite(random_anchor))
    throw DomainError("normalise_score: degenerate anchors");
  return (raw - random_anchor) / (top_anchor - random_anchor);
}

std::vector<CalibrationRow> calibration_table(const std::vector<CalibrationInput>& cells) {
  std::vector<CalibrationRow> rows;
  rows.reserve(cells.size());
  for (const auto& c : cells)
    rows.push_back({c.cell_id, c.algorithm, c.variant, c.true_normalised, c.predicted_normalised,
                    c.predicted_normalised - c.true_normalised});
  return rows;
}

}  // namespace orl::eval
