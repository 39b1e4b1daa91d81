#pragma once

#include <functional>

#include "orl/rl/agent.hpp"

namespace orl::ope {

using nn::Matrix;
using nn::Vector;

struct FqeConfig {
  double lr = 3e-4;
  int batch_size = 256;
  int hidden_dim = 64;
  int hidden_layers = 2;
  double gamma = 1.0;
  int update_steps = 30000;
  double polyak = 0.005;
  rl::Formulation formulation = rl::Formulation::Mdp;
  std::uint64_t seed = 0;
  /// Raw rewards are divided by this while fitting; 0 selects the dataset's reward std.
  double reward_scale = 0.0;

  void validate() const;
};

/// Deterministic policy over encoded observation rows.
using PolicyFn = std::function<Vector(const Matrix& encoded)>;

struct FqeModel {
  nn::NetParams q;
  rl::ProblemSpec problem;
  int history = 1;
  double reward_scale = 1.0;
};

/// Fits Q of a frozen policy to raw (unstandardised) rewards of `set`.
/// Throws DivergenceError when the fit blows up.
FqeModel train_fqe(const FqeConfig& config, const rl::ProblemSpec& problem, int history,
                   const PolicyFn& policy, const data::TransitionSet& set);
FqeModel train_fqe(const FqeConfig& config, const rl::AgentBundle& agent, const data::TransitionSet& set);

/// Q(s, a) in raw reward units for encoded rows and actions.
Vector fqe_values(const FqeModel& model, const Matrix& encoded, const Vector& actions);

/// Mean of Q(s0, π(s0)) over the first observation of every episode in `set`.
double fqe_score(const FqeModel& model, const PolicyFn& policy, const data::TransitionSet& set);
double fqe_score(const FqeModel& model, const rl::AgentBundle& agent, const data::TransitionSet& set);

PolicyFn policy_of(const rl::AgentBundle& agent);

}  // namespace orl::ope
