#include "orl/env/environment.hpp"

#include "orl/errors.hpp"

namespace orl::env {

std::string to_string(EnvKind kind) { return kind == EnvKind::Grid ? "grid" : "glucose"; }
std::string to_string(Mode mode) { return mode == Mode::Regular ? "regular" : "irregular"; }

EnvKind parse_env_kind(const std::string& s) {
  if (s == "grid") return EnvKind::Grid;
  if (s == "glucose") return EnvKind::Glucose;
  throw ConfigError("unknown environment '" + s + "' (expected grid or glucose)");
}

Mode parse_mode(const std::string& s) {
  if (s == "regular") return Mode::Regular;
  if (s == "irregular") return Mode::Irregular;
  throw ConfigError("unknown mode '" + s + "' (expected regular or irregular)");
}

int Environment::draw_interval() { return mode_ == Mode::Regular ? 1 : draw_irregular_interval(); }

DecisionStep Environment::decision_step(double action, double gamma, int forced_dt) {
  if (done()) throw UsageError("decision_step called after the episode ended");
  const int dt = forced_dt > 0 ? forced_dt : draw_interval();
  const auto summed = summed_feature();
  DecisionStep out;
  double discount = 1.0;
  double accumulated = 0.0;
  for (int i = 0; i < dt; ++i) {
    BaseStep s = step(action);
    out.reward += discount * s.reward;
    discount *= gamma;
    if (summed) accumulated += s.obs[*summed];
    out.atomic_rewards.push_back(s.reward);
    out.base_observations.push_back(s.obs);
    out.obs = std::move(s.obs);
    ++out.dt;
    if (s.done) {
      out.done = true;
      break;
    }
  }
  if (summed) out.obs[*summed] = accumulated;
  return out;
}

}  // namespace orl::env
