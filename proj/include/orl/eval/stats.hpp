#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "orl/env/controller.hpp"

namespace orl::eval {

struct Protocol {
  int grid_episodes = 100;
  int glucose_episodes_per_patient = 30;
  double max_excluded_fraction = 0.05;
};

/// Undiscounted raw returns of one deployed run, with a stratum label per
/// episode (patient id for glucose, 0 for grid).
struct RunScore {
  std::string run_id;
  std::string algorithm;
  std::string variant;
  env::Mode mode = env::Mode::Regular;
  std::vector<double> returns;
  std::vector<int> strata;
  int excluded = 0;

  double mean() const;
};

/// Deploys `controller` for the protocol's episode count. Grid episodes are
/// seeded per index; glucose runs `glucose_episodes_per_patient` episodes for
/// every roster entry. Episodes whose simulation aborts are excluded; more
/// than the allowed fraction throws SimulationError.
RunScore rollout_eval(env::Environment& environment, env::Controller& controller, const Protocol& protocol,
                      std::uint64_t seed);

/// Interquartile mean with fractional trimming of n/4 weight at each end.
double iqm(std::span<const double> values);

/// Linear-interpolation quantile of a sorted sample.
double quantile_sorted(std::span<const double> sorted, double q);

struct Interval {
  double low = 0.0;
  double high = 0.0;
  double width() const { return high - low; }
};

/// One replicate: every run resampled with replacement within each of its strata.
std::vector<RunScore> bootstrap_replicate(const std::vector<RunScore>& runs, Rng& rng);

/// Percentile interval of the cross-run IQM of per-run means under stratified
/// episode resampling. Replicate r draws from its own stream, so the result
/// does not depend on evaluation order.
Interval stratified_bootstrap_ci(const std::vector<RunScore>& runs, int replicates = 10000, double level = 0.95,
                                 std::uint64_t seed = 0);

/// Percentile interval of the IQM of plain values resampled with replacement.
Interval bootstrap_ci(std::span<const double> values, int replicates = 10000, double level = 0.95,
                      std::uint64_t seed = 0);

/// IQM across runs of per-run mean returns.
double aggregate_iqm(const std::vector<RunScore>& runs);

/// (raw − random)/(top − random).
double normalise_score(double raw, double random_anchor, double top_anchor);

struct CalibrationInput {
  std::string cell_id;
  std::string algorithm;
  std::string variant;
  double true_normalised = 0.0;
  double predicted_normalised = 0.0;
};

struct CalibrationRow {
  std::string cell_id;
  std::string algorithm;
  std::string variant;
  double true_normalised = 0.0;
  double predicted_normalised = 0.0;
  double gap = 0.0;  // predicted − true
};

std::vector<CalibrationRow> calibration_table(const std::vector<CalibrationInput>& cells);

}  // namespace orl::eval
