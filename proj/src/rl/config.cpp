#include "orl/rl/config.hpp"

#include "orl/errors.hpp"
#include "orl/kv.hpp"

namespace orl::rl {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Bc: return "bc";
    case Algorithm::Iql: return "iql";
    case Algorithm::Cql: return "cql";
  }
  return "?";
}

std::string to_string(Formulation f) { return f == Formulation::Mdp ? "mdp" : "smdp"; }

Algorithm parse_algorithm(const std::string& s) {
  if (s == "bc") return Algorithm::Bc;
  if (s == "iql") return Algorithm::Iql;
  if (s == "cql") return Algorithm::Cql;
  throw ConfigError("unknown algorithm '" + s + "' (expected bc, iql or cql)");
}

Formulation parse_formulation(const std::string& s) {
  if (s == "mdp") return Formulation::Mdp;
  if (s == "smdp") return Formulation::Smdp;
  throw ConfigError("unknown formulation '" + s + "' (expected mdp or smdp)");
}

AlgoConfig AlgoConfig::defaults(env::EnvKind env, Algorithm algorithm) {
  AlgoConfig c;
  c.algorithm = algorithm;
  if (env == env::EnvKind::Grid) {
    c.lr = 1e-3;
    c.batch_size = 64;
    c.hidden_dim = 64;
    c.expectile = 0.8;
    c.cql_entropy = 0.2;
    c.update_steps = 10000;
    c.history = 1;
  } else {
    c.lr = 3e-4;
    c.batch_size = 1024;
    c.hidden_dim = 128;
    c.expectile = 0.9;
    c.cql_entropy = 0.0;
    c.update_steps = 100000;
    c.history = 8;
  }
  c.gamma = 0.99;
  c.temperature = 10.0;
  c.cql_alpha = 1.0;
  c.polyak = 0.005;
  return c;
}

void AlgoConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  if (!(expectile > 0.0 && expectile < 1.0)) throw ConfigError("expectile must lie in (0, 1)");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (!(cql_alpha >= 0.0)) throw ConfigError("cql_alpha must be non-negative");
  if (!(cql_entropy >= 0.0)) throw ConfigError("cql_entropy must be non-negative");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (batch_size < 1 || hidden_dim < 1 || hidden_layers < 1 || history < 1)
    throw ConfigError("batch_size, hidden_dim, hidden_layers and history must be positive");
  if (update_steps < 0) throw ConfigError("update_steps must be non-negative");
  if (!(polyak >= 0.0 && polyak <= 1.0)) throw ConfigError("polyak must lie in [0, 1]");
  if (eval_every < 1 || patience < 1) throw ConfigError("eval_every and patience must be positive");
  if (cql_uniform_samples < 0) throw ConfigError("cql_uniform_samples must be non-negative");
}

void AlgoConfig::to_key_values(KeyValues& kv, const std::string& p) const {
  kv.set(p + "algorithm", to_string(algorithm));
  kv.set(p + "formulation", to_string(formulation));
  kv.set(p + "gamma", gamma);
  kv.set(p + "lr", lr);
  kv.set(p + "batch_size", batch_size);
  kv.set(p + "hidden_dim", hidden_dim);
  kv.set(p + "hidden_layers", hidden_layers);
  kv.set(p + "update_steps", update_steps);
  kv.set(p + "expectile", expectile);
  kv.set(p + "temperature", temperature);
  kv.set(p + "cql_alpha", cql_alpha);
  kv.set(p + "cql_entropy", cql_entropy);
  kv.set(p + "cql_uniform_samples", cql_uniform_samples);
  kv.set(p + "cql_backup", cql_backup == CqlBackup::Policy ? "policy" : "greedy");
  kv.set(p + "advantage_clip", advantage_clip);
  kv.set(p + "polyak", polyak);
  kv.set(p + "eval_every", eval_every);
  kv.set(p + "patience", patience);
  kv.set(p + "history", history);
  kv.set(p + "seed", seed);
}

void AlgoConfig::apply_key_values(const KeyValues& kv, const std::string& p) {
  auto num = [&](const char* key, double& field) {
    if (kv.contains(p + key)) field = kv.get_double(p + key);
  };
  auto integer = [&](const char* key, int& field) {
    if (kv.contains(p + key)) field = static_cast<int>(kv.get_int(p + key));
  };
  if (kv.contains(p + "algorithm")) algorithm = parse_algorithm(kv.get(p + "algorithm"));
  if (kv.contains(p + "formulation")) formulation = parse_formulation(kv.get(p + "formulation"));
  num("gamma", gamma);
  num("lr", lr);
  integer("batch_size", batch_size);
  integer("hidden_dim", hidden_dim);
  integer("hidden_layers", hidden_layers);
  integer("update_steps", update_steps);
  num("expectile", expectile);
  num("temperature", temperature);
  num("cql_alpha", cql_alpha);
  num("cql_entropy", cql_entropy);
  integer("cql_uniform_samples", cql_uniform_samples);
  if (kv.contains(p + "cql_backup")) {
    const auto& b = kv.get(p + "cql_backup");
    if (b != "policy" && b != "greedy") throw ConfigError("cql_backup must be policy or greedy");
    cql_backup = b == "policy" ? CqlBackup::Policy : CqlBackup::Greedy;
  }
  num("advantage_clip", advantage_clip);
  num("polyak", polyak);
  integer("eval_every", eval_every);
  integer("patience", patience);
  integer("history", history);
  if (kv.contains(p + "seed")) seed = kv.get_uint(p + "seed");
}

}  // namespace orl::rl
