#pragma once

#include <cstdint>
#include <string>

#include "orl/env/environment.hpp"

namespace orl {
class KeyValues;
}

namespace orl::rl {

enum class Algorithm : std::uint8_t { Bc = 0, Iql = 1, Cql = 2 };
enum class Formulation : std::uint8_t { Mdp = 0, Smdp = 1 };
/// Next-state value used by the CQL critic target: expectation under the
/// current policy, or the max over actions (discrete only).
enum class CqlBackup : std::uint8_t { Policy = 0, Greedy = 1 };

std::string to_string(Algorithm a);
std::string to_string(Formulation f);
Algorithm parse_algorithm(const std::string& s);
Formulation parse_formulation(const std::string& s);

struct AlgoConfig {
  Algorithm algorithm = Algorithm::Iql;
  Formulation formulation = Formulation::Mdp;
  double gamma = 0.99;
  double lr = 1e-3;
  int batch_size = 64;
  int hidden_dim = 64;
  int hidden_layers = 2;
  int update_steps = 10000;
  double expectile = 0.8;        // IQL τ
  double temperature = 10.0;     // advantage temperature β (IQL, and CQL policy extraction)
  double cql_alpha = 1.0;        // conservative regulariser weight
  double cql_entropy = 0.2;      // entropy bonus weight
  int cql_uniform_samples = 10;  // continuous logsumexp: uniform action samples
  CqlBackup cql_backup = CqlBackup::Policy;
  double advantage_clip = 4.605170185988092;  // exponent clamp in exp(β·A), caps weights at 100
  double polyak = 0.005;
  int eval_every = 5000;
  int patience = 4;
  int history = 1;  // stacked observations fed to the encoder
  std::uint64_t seed = 0;

  /// Table-1 defaults for an environment and algorithm.
  static AlgoConfig defaults(env::EnvKind env, Algorithm algorithm);
  /// Throws ConfigError when an invariant fails (γ ∈ [0,1), τ ∈ (0,1), β > 0, ...).
  void validate() const;

  void to_key_values(KeyValues& kv, const std::string& prefix = "") const;
  /// Overrides every field present in `kv` under `prefix`; absent keys keep their value.
  void apply_key_values(const KeyValues& kv, const std::string& prefix = "");
};

}  // namespace orl::rl
