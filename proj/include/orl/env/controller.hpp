#pragma once

#include "orl/env/environment.hpp"
#include "orl/random.hpp"

namespace orl::env {

/// Anything that picks actions at decision epochs: scripted experts, trained
/// agents, the uniform-random anchor.
class Controller {
 public:
  virtual ~Controller() = default;

  virtual void begin_episode() = 0;
  /// `env` is passed so privileged controllers (the grid expert) can read the
  /// full state; learners only use `obs`. `steps_since_last` is the number of
  /// base steps since the previous decision (0 at the first decision).
  virtual double act(const Environment& env, const Observation& obs, int steps_since_last) = 0;
};

/// Uniform over discrete actions or over [low, high].
class RandomController final : public Controller {
 public:
  explicit RandomController(std::uint64_t seed);
  void begin_episode() override {}
  double act(const Environment& env, const Observation& obs, int steps_since_last) override;

 private:
  Rng rng_;
};

}  // namespace orl::env
