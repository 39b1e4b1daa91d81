#pragma once

#include <deque>
#include <filesystem>
#include <span>
#include <vector>

#include "orl/data/dataset.hpp"
#include "orl/env/controller.hpp"
#include "orl/nn/mlp.hpp"
#include "orl/rl/config.hpp"

namespace orl::rl {

using nn::Matrix;
using nn::NetParams;
using nn::Vector;

/// Shape of the decision problem an agent is built for.
struct ProblemSpec {
  env::EnvKind env = env::EnvKind::Grid;
  bool discrete = true;
  std::size_t obs_dim = 0;
  std::size_t action_count = 4;  // discrete actions, or 1 for continuous
  double action_low = 0.0;
  double action_high = 1.0;

  static ProblemSpec of(const data::TransitionSet& set);
};

/// Networks of one trained agent. Every head is an MLP over the encoded
/// input; continuous critics take the scaled action concatenated to it.
struct AgentBundle {
  ProblemSpec problem;
  AlgoConfig config;
  NetParams policy;     // logits (discrete) or two raw Beta outputs (continuous)
  NetParams q1, q2;     // critics, unused by BC
  NetParams q1_target, q2_target;
  NetParams value;      // IQL only
  int trained_steps = 0;

  std::size_t encoded_dim() const { return problem.obs_dim * static_cast<std::size_t>(config.history); }
  /// Input width of a critic: encoded observation, plus one action column when continuous.
  std::size_t critic_input_dim() const { return encoded_dim() + (problem.discrete ? 0 : 1); }
  std::size_t critic_output_dim() const { return problem.discrete ? problem.action_count : 1; }
};

/// Fresh networks with the configured widths, initialised from the config seed.
AgentBundle make_agent(const ProblemSpec& problem, const AlgoConfig& config);

/// Stacks the last `history` observations (oldest first) into one vector;
/// frames before the start of the episode are zeros.
Vector encode(std::size_t obs_dim, int history, std::span<const env::Observation> frames);
Vector encode(const AgentBundle& agent, std::span<const env::Observation> frames);

/// Maps an action in [low, high] to [−1, 1] for critic inputs.
double scale_action(const ProblemSpec& p, double action);

/// Batched critic input: encoded rows with the scaled action appended (continuous).
Matrix critic_input(const AgentBundle& agent, const Matrix& encoded, const Vector& actions);

/// Greedy/mean action for each encoded row: argmax of the logits (lowest
/// index wins ties) or the Beta mean.
Vector deterministic_actions(const AgentBundle& agent, const Matrix& encoded);
double deterministic_action(const AgentBundle& agent, const Vector& encoded);
int argmax_lowest(const Eigen::Ref<const Vector>& logits);

/// Agent acting in an environment from its own history of decision-epoch observations.
class AgentController final : public env::Controller {
 public:
  explicit AgentController(const AgentBundle& agent) : agent_(agent) {}
  void begin_episode() override { frames_.clear(); }
  double act(const env::Environment& env, const env::Observation& obs, int steps_since_last) override;

 private:
  const AgentBundle& agent_;
  std::deque<env::Observation> frames_;
};

/// Writes policy/critic/value ONNP files plus a metadata sidecar into `dir`.
void save_agent(const std::filesystem::path& dir, const AgentBundle& agent,
                const std::vector<std::pair<std::string, std::string>>& extra_meta = {});
AgentBundle load_agent(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Training data laid out as dense matrices with history stacking applied.
// ---------------------------------------------------------------------------

struct Batch {
  Matrix obs;       // encoded
  Matrix next_obs;  // encoded
  Vector actions;   // index (discrete) or value (continuous)
  std::vector<int> action_index;
  Vector rewards;
  Vector discounts;  // γ or γ^Δt, multiplied by (1 − done)
};

class TransitionMatrix {
 public:
  TransitionMatrix(const data::TransitionSet& set, int history, double gamma, Formulation formulation);

  std::size_t size() const { return static_cast<std::size_t>(rewards_.size()); }
  Batch gather(std::span<const std::size_t> rows) const;
  Batch sample(Rng& rng, std::size_t batch_size) const;
  /// First record of every episode, encoded.
  Matrix initial_observations() const;

  const Matrix& obs() const { return obs_; }
  const Matrix& next_obs() const { return next_obs_; }
  const Vector& actions() const { return actions_; }
  const Vector& rewards() const { return rewards_; }
  const Vector& discounts() const { return discounts_; }
  const std::vector<std::size_t>& episode_starts() const { return starts_; }

  /// Replaces the reward column (used by FQE to undo standardisation).
  void set_rewards(Vector r);
  /// Overrides the discount column with γ^Δt·(1 − done) for a new γ.
  void set_discount(double gamma, Formulation formulation);

 private:
  Matrix obs_;
  Matrix next_obs_;
  Vector actions_;
  Vector rewards_;
  Vector discounts_;
  std::vector<int> dts_;
  std::vector<char> done_;
  std::vector<std::size_t> starts_;
};

}  // namespace orl::rl
