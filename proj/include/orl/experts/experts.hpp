#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "orl/env/controller.hpp"
#include "orl/env/gridworld.hpp"

namespace orl::experts {

/// First action of a shortest (forward/rotate) path to the goal that never
/// enters lava; nullopt when the goal cannot be reached.
std::optional<env::GridAction> shortest_path_action(const env::GridState& state);

/// Breadth-first-search expert with full view of the grid. With probability
/// ε the planned action is replaced by a uniform random one.
class GridBfsExpert final : public env::Controller {
 public:
  GridBfsExpert(double epsilon, std::uint64_t seed);

  void begin_episode() override { stuck_ = false; }
  double act(const env::Environment& env, const env::Observation& obs, int steps_since_last) override;

  /// Categorical distribution over the four actions for this state.
  std::array<double, env::kGridActionCount> distribution(const env::GridState& state);
  bool stuck() const { return stuck_; }
  double epsilon() const { return epsilon_; }

 private:
  double epsilon_;
  Rng rng_;
  bool stuck_ = false;
};

struct PdGains {
  double kp = 2e-4;         // U/min per mg/dL
  double kd = 4e-3;         // U/min per (mg/dL/min)
  double target = 120.0;    // mg/dL
  double u_basal = 0.02;    // U/min, patient-agnostic
};

/// Proportional-derivative basal controller with clamped Gaussian exploration
/// noise of standard deviation ε·0.05 U/min.
class GlucosePdExpert final : public env::Controller {
 public:
  GlucosePdExpert(double epsilon, PdGains gains, std::uint64_t seed);

  void begin_episode() override { previous_glucose_.reset(); }
  double act(const env::Environment& env, const env::Observation& obs, int steps_since_last) override;

  /// Noise-free action for the current and previous glucose readings.
  double mean_action(double glucose, double previous_glucose, double minutes) const;
  double noise_std() const { return epsilon_ * 0.05; }
  const PdGains& gains() const { return gains_; }

 private:
  double epsilon_;
  PdGains gains_;
  Rng rng_;
  std::optional<double> previous_glucose_;
};

struct CalibrationPoint {
  double epsilon = 0.0;
  double score = 0.0;
  double fraction = 0.0;  // (score − random) / (score(ε=0) − random)
};

struct CalibrationResult {
  double epsilon = 0.0;
  double fraction = 0.0;
  bool in_band = false;
  double random_score = 0.0;
  double best_score = 0.0;
  std::vector<CalibrationPoint> evaluated;
};

/// Bisection on ε ∈ [0, 1] for a noise level whose random-shifted score lands
/// in [band_lo, band_hi] of the noise-free score. Returns the evaluated point
/// closest to the band midpoint; `in_band` is false (and a warning is logged)
/// when no evaluated ε made it into the band.
CalibrationResult calibrate_expert(const std::function<double(double)>& score_at,
                                   double random_score, double band_lo, double band_hi,
                                   int iterations = 12);

void write_calibration_csv(std::ostream& os, const CalibrationResult& result);

}  // namespace orl::experts
