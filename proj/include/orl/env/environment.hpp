#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace orl::env {

enum class EnvKind : std::uint8_t { Grid = 0, Glucose = 1 };
enum class Mode : std::uint8_t { Regular = 0, Irregular = 1 };

std::string to_string(EnvKind kind);
std::string to_string(Mode mode);
EnvKind parse_env_kind(const std::string& s);
Mode parse_mode(const std::string& s);

using Observation = std::vector<double>;

/// One base time step.
struct BaseStep {
  Observation obs;
  double reward = 0.0;
  bool done = false;
};

/// One decision epoch: an action held for `dt` base steps.
struct DecisionStep {
  Observation obs;
  double reward = 0.0;  // Σ_{i<dt} γ^i p_{t+i+1}
  int dt = 0;           // base steps actually executed (shorter if the episode ended)
  bool done = false;
  std::vector<double> atomic_rewards;
  std::vector<Observation> base_observations;  // one per executed base step
};

/// A steppable environment at base-time-step granularity. Actions are passed
/// as doubles; discrete environments interpret them as an action index.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual EnvKind kind() const = 0;
  virtual std::size_t obs_dim() const = 0;
  virtual bool discrete() const = 0;
  /// Number of discrete actions (discrete) or 1 (continuous action dimension).
  virtual std::size_t action_count() const = 0;
  virtual double action_low() const = 0;
  virtual double action_high() const = 0;

  virtual Observation reset(std::uint64_t seed) = 0;
  virtual BaseStep step(double action) = 0;
  virtual bool done() const = 0;
  /// Observation feature accumulated (summed) across a held interval, if any.
  virtual std::optional<std::size_t> summed_feature() const { return std::nullopt; }

  Mode mode() const { return mode_; }
  void set_mode(Mode m) { mode_ = m; }

  /// Draws the number of base steps the next decision is held for.
  /// Regular mode always returns 1 without consuming randomness.
  int draw_interval();

  /// Holds `action` for a drawn interval (or `forced_dt` when positive) and
  /// accrues the discounted atomic rewards.
  DecisionStep decision_step(double action, double gamma, int forced_dt = 0);

 protected:
  explicit Environment(Mode mode) : mode_(mode) {}
  virtual int draw_irregular_interval() = 0;

 private:
  Mode mode_;
};

}  // namespace orl::env
