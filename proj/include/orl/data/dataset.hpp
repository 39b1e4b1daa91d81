#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "orl/env/controller.hpp"
#include "orl/env/environment.hpp"

namespace orl::data {

enum class Variant : std::uint8_t { Unprocessed = 0, Interpolated = 1, Binned = 2 };

std::string to_string(Variant v);

// ---------------------------------------------------------------------------
// Atomic log: every base step of every episode, as it happened.
// ---------------------------------------------------------------------------

struct AtomicRecord {
  int t = 0;                    // base step index within the episode
  env::Observation obs;         // o_t, before the action
  std::vector<double> action;   // action applied during step t
  double reward = 0.0;          // p_{t+1}
  bool decision = false;        // the controller chose anew at t
  bool done = false;
};

struct AtomicEpisode {
  std::vector<AtomicRecord> records;
  env::Observation final_obs;  // o_T after the last step
};

struct AtomicLog {
  env::EnvKind env = env::EnvKind::Grid;
  bool discrete = true;
  std::size_t obs_dim = 0;
  std::size_t action_dim = 1;
  /// Feature summed (rather than sampled) over a held interval, e.g. carbohydrates.
  std::optional<std::size_t> summed_feature;
  std::uint64_t seed = 0;
  std::vector<AtomicEpisode> episodes;

  std::size_t base_steps() const;
  std::size_t decisions() const;
};

/// Throws FormatError unless: every episode starts with a decision flag,
/// actions stay constant between decision flags, exactly the last record is done,
/// and t runs 0, 1, 2, ...
void validate(const AtomicLog& log);

/// Rolls episodes of `environment` (its own mode decides the hold intervals)
/// with `controller` until at least `min_steps` base steps are logged.
AtomicLog collect(env::Environment& environment, env::Controller& controller,
                  std::size_t min_steps, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Transition sets.
// ---------------------------------------------------------------------------

struct Transition {
  std::uint32_t episode = 0;
  std::vector<double> obs;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_obs;
  int dt = 1;
  bool done = false;
};

struct Provenance {
  std::string source;  // free-form id of the atomic log
  std::uint64_t seed = 0;
  double gamma = 0.99;
};

struct TransitionSet {
  env::EnvKind env = env::EnvKind::Grid;
  Variant variant = Variant::Interpolated;
  int bin_width = 0;  // base steps per bin; 0 unless binned
  bool discrete = true;
  std::size_t obs_dim = 0;
  std::size_t action_dim = 1;
  double reward_mean = 0.0;
  double reward_std = 1.0;
  Provenance provenance;
  std::vector<Transition> records;

  std::size_t size() const { return records.size(); }
  /// Index of the first record of each episode.
  std::vector<std::size_t> episode_starts() const;
  /// Undo standardisation for a stored reward.
  double raw_reward(double stored) const { return stored * reward_std + reward_mean; }
};

/// One transition per decision epoch with γ-accrued reward and the true Δt.
TransitionSet to_unprocessed(const AtomicLog& log, double gamma);
/// One transition per base step, Δt = 1, atomic rewards.
TransitionSet to_interpolated(const AtomicLog& log);
/// Fixed windows of W base steps: observations averaged over the preceding
/// window (t_k − W, t_k], actions averaged and rewards summed over the
/// following window. Meant for continuous actions.
TransitionSet to_binned(const AtomicLog& log, int width);
/// Keeps every `stride`-th base step; rewards summed over the skipped span.
/// The binned form for discrete actions, which are never averaged.
TransitionSet to_binned_subsample(const AtomicLog& log, int stride);

/// Standardises rewards of `train` and every set in `others` with the mean
/// and (population) standard deviation of `train`'s reward column. Stored
/// constants compose, so raw_reward() always recovers the original reward.
void standardise_rewards(TransitionSet& train, const std::vector<TransitionSet*>& others = {});

struct RewardStats {
  double mean = 0.0;
  double std = 0.0;
};
RewardStats reward_stats(const TransitionSet& set);

// ---------------------------------------------------------------------------
// Diagnostics.
// ---------------------------------------------------------------------------

struct ReversalEvent {
  std::size_t episode = 0;
  int event_step = 0;       // first base step whose observation carries the event
  int action_step = 0;      // first action change after the event
  int action_bin = 0;       // bin whose action average includes the change
  int observation_bin = 0;  // first bin whose averaged observation includes the event
};

/// Flags events (feature > 0 at step t_e) whose triggered action change (first
/// change at t_a > t_e, within the same or next window) lands, after binning,
/// in an earlier bin than the first bin whose observation reflects the event.
std::vector<ReversalEvent> detect_causal_reversal(const AtomicLog& log, int width,
                                                  std::size_t event_feature,
                                                  std::size_t action_index = 0);

}  // namespace orl::data
