#include "orl/ope/fqe.hpp"

#include <cmath>

#include "orl/errors.hpp"
#include "orl/nn/losses.hpp"

namespace orl::ope {

void FqeConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("fqe gamma must lie in [0, 1]");
  if (!(lr > 0.0)) throw ConfigError("fqe lr must be positive");
  if (batch_size < 1 || hidden_dim < 1 || hidden_layers < 1 || update_steps < 0)
    throw ConfigError("fqe batch_size, hidden_dim and hidden_layers must be positive");
  if (!(polyak >= 0.0 && polyak <= 1.0)) throw ConfigError("fqe polyak must lie in [0, 1]");
  if (reward_scale < 0.0) throw ConfigError("fqe reward_scale must be non-negative");
}

namespace {

Matrix q_input(const rl::ProblemSpec& p, const Matrix& encoded, const Vector& actions) {
  if (p.discrete) return encoded;
  Matrix x(encoded.rows(), encoded.cols() + 1);
  x.leftCols(encoded.cols()) = encoded;
  for (Eigen::Index i = 0; i < encoded.rows(); ++i) x(i, encoded.cols()) = rl::scale_action(p, actions(i));
  return x;
}

// Column per row: the action index (discrete) or 0 (continuous).
std::vector<int> columns(const rl::ProblemSpec& p, const Vector& actions) {
  std::vector<int> cols(static_cast<std::size_t>(actions.size()), 0);
  if (p.discrete)
    for (Eigen::Index i = 0; i < actions.size(); ++i) cols[static_cast<std::size_t>(i)] = static_cast<int>(std::lround(actions(i)));
  return cols;
}

Vector evaluate(const nn::NetParams& q, const rl::ProblemSpec& p, const Matrix& encoded, const Vector& actions) {
  const Matrix out = nn::mlp_forward(q, q_input(p, encoded, actions));
  const auto cols = columns(p, actions);
  Vector v(out.rows());
  for (Eigen::Index i = 0; i < out.rows(); ++i) v(i) = out(i, cols[static_cast<std::size_t>(i)]);
  return v;
}

}  // namespace

FqeModel train_fqe(const FqeConfig& config, const rl::ProblemSpec& problem, int history,
                   const PolicyFn& policy, const data::TransitionSet& set) {
  config.validate();
  rl::TransitionMatrix data(set, history, config.gamma, config.formulation);

  FqeModel m;
  m.problem = problem;
  m.history = history;
  m.reward_scale = config.reward_scale > 0.0 ? config.reward_scale : set.reward_std;
  if (!(m.reward_scale > 0.0)) throw ConfigError("fqe: reward scale must be positive");

  Vector rewards(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    rewards(static_cast<Eigen::Index>(i)) = set.raw_reward(data.rewards()(static_cast<Eigen::Index>(i))) / m.reward_scale;
  data.set_rewards(std::move(rewards));

  Rng init = make_rng(config.seed, stream::kFqe, 0);
  std::vector<std::size_t> dims{static_cast<std::size_t>(data.obs().cols()) + (problem.discrete ? 0 : 1)};
  for (int i = 0; i < config.hidden_layers; ++i) dims.push_back(static_cast<std::size_t>(config.hidden_dim));
  dims.push_back(problem.discrete ? problem.action_count : 1);
  m.q = nn::make_mlp(dims, init);
  nn::NetParams target = nn::clone_parameters(m.q);

  const Vector next_actions = policy(data.next_obs());
  if (static_cast<std::size_t>(next_actions.size()) != data.size()) throw ConfigError("fqe: policy returned wrong row count");

  Rng rng = make_rng(config.seed, stream::kFqe, 1);
  std::vector<std::size_t> rows(static_cast<std::size_t>(config.batch_size));
  Vector batch_next(config.batch_size);
  for (int step = 0; step < config.update_steps; ++step) {
    for (std::size_t k = 0; k < rows.size(); ++k) {
      rows[k] = static_cast<std::size_t>(uniform_index(rng, data.size()));
      batch_next(static_cast<Eigen::Index>(k)) = next_actions(static_cast<Eigen::Index>(rows[k]));
    }
    const rl::Batch b = data.gather(rows);
    const Vector y = b.rewards + b.discounts.cwiseProduct(evaluate(target, problem, b.next_obs, batch_next));
    nn::ForwardCache cache;
    const Matrix out = nn::mlp_forward(m.q, q_input(problem, b.obs, b.actions), &cache);
    const auto loss = nn::bellman_mse(out, columns(problem, b.actions), y);
    if (!std::isfinite(loss.value)) throw DivergenceError("fqe loss is not finite at step " + std::to_string(step));
    const auto back = nn::mlp_backward(m.q, cache, loss.grad);
    nn::adam_step(m.q, back.grads, config.lr);
    nn::polyak_update(target, m.q, config.polyak);
  }
  return m;
}

FqeModel train_fqe(const FqeConfig& config, const rl::AgentBundle& agent, const data::TransitionSet& set) {
  return train_fqe(config, agent.problem, agent.config.history, policy_of(agent), set);
}

Vector fqe_values(const FqeModel& model, const Matrix& encoded, const Vector& actions) {
  return evaluate(model.q, model.problem, encoded, actions) * model.reward_scale;
}

double fqe_score(const FqeModel& model, const PolicyFn& policy, const data::TransitionSet& set) {
  if (set.records.empty()) throw ConfigError("fqe_score: empty transition set");
  const rl::TransitionMatrix data(set, model.history, 1.0, rl::Formulation::Mdp);
  const Matrix s0 = data.initial_observations();
  const Vector v = fqe_values(model, s0, policy(s0));
  if (!v.allFinite()) throw DivergenceError("fqe_score: non-finite value");
  return v.mean();
}

double fqe_score(const FqeModel& model, const rl::AgentBundle& agent, const data::TransitionSet& set) {
  return fqe_score(model, policy_of(agent), set);
}

PolicyFn policy_of(const rl::AgentBundle& agent) {
  return [&agent](const Matrix& encoded) { return rl::deterministic_actions(agent, encoded); };
}

}  // namespace orl::ope
