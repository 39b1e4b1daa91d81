#include "orl/env/controller.hpp"

namespace orl::env {

RandomController::RandomController(std::uint64_t seed) : rng_(seed) {}

double RandomController::act(const Environment& env, const Observation&, int) {
  if (env.discrete()) return static_cast<double>(uniform_index(rng_, env.action_count()));
  return env.action_low() + (env.action_high() - env.action_low()) * uniform01(rng_);
}

}  // namespace orl::env
