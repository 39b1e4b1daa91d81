#pragma once

#include <functional>
#include <vector>

#include "orl/rl/agent.hpp"

namespace orl::rl {

struct UpdateStats {
  double critic_loss = 0.0;
  double value_loss = 0.0;
  double policy_loss = 0.0;
};

/// Runs single gradient updates of one algorithm over a fixed transition matrix.
/// The matrix must outlive the trainer.
class Trainer {
 public:
  Trainer(AgentBundle agent, const TransitionMatrix& data);

  /// Samples a batch (uniform, with replacement) and applies one update.
  UpdateStats step();
  /// One update on a given batch. Throws DivergenceError on a non-finite loss.
  UpdateStats update(const Batch& batch);

  const AgentBundle& agent() const { return agent_; }
  AgentBundle& agent() { return agent_; }
  int steps() const { return agent_.trained_steps; }

 private:
  UpdateStats update_bc(const Batch& b);
  UpdateStats update_iql(const Batch& b);
  UpdateStats update_cql(const Batch& b);

  AgentBundle agent_;
  const TransitionMatrix& data_;
  Rng batch_rng_;
  Rng policy_rng_;
};

/// Patience rule over a sequence of validation scores. Evaluations are
/// counted from 1; only a strictly higher score counts as improvement.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience);

  /// Records a score and returns true when it is a new best.
  bool observe(double score);
  bool should_stop() const { return since_best_ >= patience_; }
  int best_eval() const { return best_eval_; }
  double best_score() const { return best_; }
  int evals() const { return evals_; }

 private:
  int patience_;
  int evals_ = 0;
  int best_eval_ = 0;
  int since_best_ = 0;
  double best_ = 0.0;
};

using ValidationHook = std::function<double(const AgentBundle&)>;

struct TrainResult {
  AgentBundle agent;  // best checkpoint, or the final one without a hook
  int best_step = 0;
  int stop_step = 0;
  std::vector<double> validation_scores;
};

/// Trains for config.update_steps. With a validation hook, scores every
/// eval_every steps, keeps the best checkpoint and stops after `patience`
/// evaluations without improvement.
TrainResult train_agent(const AlgoConfig& config, const data::TransitionSet& set,
                        const ValidationHook& hook = {});

TrainResult train_bc(AlgoConfig config, const data::TransitionSet& set, const ValidationHook& hook = {});
TrainResult train_iql(AlgoConfig config, const data::TransitionSet& set, const ValidationHook& hook = {});
TrainResult train_cql(AlgoConfig config, const data::TransitionSet& set, const ValidationHook& hook = {});

/// Same loop over an already built trainer.
TrainResult early_stop_loop(Trainer& trainer, const ValidationHook& hook);

}  // namespace orl::rl
