#include "orl/rl/trainers.hpp"

#include <algorithm>
#include <cmath>

#include "orl/errors.hpp"
#include "orl/nn/beta_head.hpp"
#include "orl/nn/losses.hpp"

namespace orl::rl {

namespace {

void check_finite(double loss, const char* what) {
  if (!std::isfinite(loss)) throw DivergenceError(std::string(what) + " loss is not finite");
}

// Forward, backward and one Adam step for a loss gradient at the outputs.
void apply(NetParams& net, const nn::ForwardCache& cache, const Matrix& grad, double lr) {
  const auto back = nn::mlp_backward(net, cache, grad);
  nn::adam_step(net, back.grads, lr);
}

// Q(s, a) for the logged actions.
Vector q_logged(const AgentBundle& a, const NetParams& q, const Batch& b) {
  if (a.problem.discrete) {
    const Matrix out = nn::mlp_forward(q, b.obs);
    Vector v(out.rows());
    for (Eigen::Index i = 0; i < out.rows(); ++i) v(i) = out(i, b.action_index[static_cast<std::size_t>(i)]);
    return v;
  }
  return nn::mlp_forward(q, critic_input(a, b.obs, b.actions)).col(0);
}

Vector min_target_logged(const AgentBundle& a, const Batch& b) {
  return nn::clipped_double_q(q_logged(a, a.q1_target, b), q_logged(a, a.q2_target, b));
}

Vector awr_weights(const Vector& advantage, double beta, double clip) {
  Vector w(advantage.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = std::exp(std::min(beta * advantage(i), clip));
  return w;
}

Vector beta_means(const AgentBundle& a, const Matrix& raw) {
  Vector m(raw.rows());
  for (Eigen::Index i = 0; i < raw.rows(); ++i)
    m(i) = nn::BetaHead::from_raw(raw(i, 0), raw(i, 1), a.problem.action_low, a.problem.action_high).mean();
  return m;
}

Vector beta_samples(const AgentBundle& a, const Matrix& raw, Rng& rng) {
  Vector s(raw.rows());
  for (Eigen::Index i = 0; i < raw.rows(); ++i)
    s(i) = nn::BetaHead::from_raw(raw(i, 0), raw(i, 1), a.problem.action_low, a.problem.action_high).sample(rng);
  return s;
}

// Weighted policy regression onto logged actions, plus an optional entropy bonus.
double fit_policy(AgentBundle& a, const Batch& b, const Vector* weights, double entropy_weight) {
  nn::ForwardCache cache;
  const Matrix out = nn::mlp_forward(a.policy, b.obs, &cache);
  nn::LossResult loss = a.problem.discrete
                            ? nn::cross_entropy(out, b.action_index, weights)
                            : nn::beta_nll(out, b.actions, a.problem.action_low, a.problem.action_high, weights);
  if (entropy_weight > 0.0) {
    const auto bonus = a.problem.discrete
                           ? nn::categorical_entropy_bonus(out, entropy_weight)
                           : nn::beta_entropy_bonus(out, a.problem.action_low, a.problem.action_high, entropy_weight);
    loss.value += bonus.value;
    loss.grad += bonus.grad;
  }
  check_finite(loss.value, "policy");
  apply(a.policy, cache, loss.grad, a.config.lr);
  return loss.value;
}

// Plain Bellman regression of one critic onto fixed targets.
double fit_critic(AgentBundle& a, NetParams& q, const Batch& b, const Vector& y) {
  nn::ForwardCache cache;
  if (a.problem.discrete) {
    const Matrix out = nn::mlp_forward(q, b.obs, &cache);
    const auto loss = nn::bellman_mse(out, b.action_index, y);
    check_finite(loss.value, "critic");
    apply(q, cache, loss.grad, a.config.lr);
    return loss.value;
  }
  const Matrix out = nn::mlp_forward(q, critic_input(a, b.obs, b.actions), &cache);
  const auto loss = nn::bellman_mse(out, {}, y);
  check_finite(loss.value, "critic");
  apply(q, cache, loss.grad, a.config.lr);
  return loss.value;
}

void update_targets(AgentBundle& a) {
  nn::polyak_update(a.q1_target, a.q1, a.config.polyak);
  nn::polyak_update(a.q2_target, a.q2, a.config.polyak);
}

}  // namespace

Trainer::Trainer(AgentBundle agent, const TransitionMatrix& data)
    : agent_(std::move(agent)),
      data_(data),
      batch_rng_(make_rng(agent_.config.seed, stream::kBatch)),
      policy_rng_(make_rng(agent_.config.seed, stream::kPolicySample)) {
  if (static_cast<std::size_t>(data.obs().cols()) != agent_.encoded_dim())
    throw ConfigError("Trainer: data encoding width does not match the agent");
}

UpdateStats Trainer::step() {
  return update(data_.sample(batch_rng_, static_cast<std::size_t>(agent_.config.batch_size)));
}

UpdateStats Trainer::update(const Batch& batch) {
  UpdateStats s;
  switch (agent_.config.algorithm) {
    case Algorithm::Bc: s = update_bc(batch); break;
    case Algorithm::Iql: s = update_iql(batch); break;
    case Algorithm::Cql: s = update_cql(batch); break;
  }
  ++agent_.trained_steps;
  return s;
}

UpdateStats Trainer::update_bc(const Batch& b) {
  UpdateStats s;
  s.policy_loss = fit_policy(agent_, b, nullptr, 0.0);
  return s;
}

UpdateStats Trainer::update_iql(const Batch& b) {
  auto& a = agent_;
  const auto& c = a.config;
  UpdateStats s;
  const Vector q_t = min_target_logged(a, b);

  {
    nn::ForwardCache cache;
    const Matrix v = nn::mlp_forward(a.value, b.obs, &cache);
    const auto loss = nn::expectile_loss(v, q_t, c.expectile);
    check_finite(loss.value, "value");
    apply(a.value, cache, loss.grad, c.lr);
    s.value_loss = loss.value;
  }

  const Vector v = nn::mlp_forward(a.value, b.obs).col(0);
  const Vector w = awr_weights(q_t - v, c.temperature, c.advantage_clip);
  s.policy_loss = fit_policy(a, b, &w, 0.0);

  const Vector v_next = nn::mlp_forward(a.value, b.next_obs).col(0);
  const Vector y = b.rewards + b.discounts.cwiseProduct(v_next);
  s.critic_loss = 0.5 * (fit_critic(a, a.q1, b, y) + fit_critic(a, a.q2, b, y));

  update_targets(a);
  return s;
}

UpdateStats Trainer::update_cql(const Batch& b) {
  auto& a = agent_;
  const auto& c = a.config;
  const auto n = b.obs.rows();
  UpdateStats s;

  // Bootstrap targets.
  Vector next_value(n);
  if (a.problem.discrete) {
    const Matrix qn = nn::clipped_double_q(nn::mlp_forward(a.q1_target, b.next_obs),
                                           nn::mlp_forward(a.q2_target, b.next_obs));
    if (c.cql_backup == CqlBackup::Greedy) {
      next_value = qn.rowwise().maxCoeff();
    } else {
      const Matrix p = nn::softmax_rows(nn::mlp_forward(a.policy, b.next_obs));
      next_value = p.cwiseProduct(qn).rowwise().sum();
    }
  } else {
    const Vector a_next = beta_samples(a, nn::mlp_forward(a.policy, b.next_obs), policy_rng_);
    const Matrix x = critic_input(a, b.next_obs, a_next);
    next_value = nn::clipped_double_q(Vector(nn::mlp_forward(a.q1_target, x).col(0)),
                                      Vector(nn::mlp_forward(a.q2_target, x).col(0)));
  }
  const Vector y = b.rewards + b.discounts.cwiseProduct(next_value);

  if (a.problem.discrete) {
    for (NetParams* q : {&a.q1, &a.q2}) {
      nn::ForwardCache cache;
      const Matrix out = nn::mlp_forward(*q, b.obs, &cache);
      auto loss = nn::bellman_mse(out, b.action_index, y);
      const auto gap = nn::logsumexp_gap(out, b.action_index);
      loss.value += c.cql_alpha * gap.value;
      loss.grad += c.cql_alpha * gap.grad;
      check_finite(loss.value, "critic");
      apply(*q, cache, loss.grad, c.lr);
      s.critic_loss += 0.5 * loss.value;
    }
  } else {
    // Candidate actions: uniform samples over the action range, then one policy sample.
    const int k = c.cql_uniform_samples;
    const Eigen::Index blocks = k + 2;
    Matrix x(n * blocks, static_cast<Eigen::Index>(a.critic_input_dim()));
    x.topRows(n) = critic_input(a, b.obs, b.actions);
    const double lo = a.problem.action_low;
    const double span = a.problem.action_high - lo;
    for (int j = 0; j < k; ++j) {
      Vector u(n);
      for (Eigen::Index i = 0; i < n; ++i) u(i) = lo + span * uniform01(policy_rng_);
      x.middleRows(n * (j + 1), n) = critic_input(a, b.obs, u);
    }
    const Vector a_pi = beta_samples(a, nn::mlp_forward(a.policy, b.obs), policy_rng_);
    x.bottomRows(n) = critic_input(a, b.obs, a_pi);

    for (NetParams* q : {&a.q1, &a.q2}) {
      nn::ForwardCache cache;
      const Matrix out = nn::mlp_forward(*q, x, &cache);
      const Matrix data_q = out.topRows(n);
      Matrix cand(n, blocks - 1);
      for (Eigen::Index j = 0; j + 1 < blocks; ++j) cand.col(j) = out.middleRows(n * (j + 1), n).col(0);
      const auto bell = nn::bellman_mse(data_q, {}, y);
      const auto pen = nn::logsumexp_penalty(cand, data_q.col(0));
      Matrix grad(out.rows(), 1);
      grad.topRows(n) = bell.grad + c.cql_alpha * Matrix(pen.data_grad);
      for (Eigen::Index j = 0; j + 1 < blocks; ++j) grad.middleRows(n * (j + 1), n) = c.cql_alpha * pen.candidates_grad.col(j);
      const double value = bell.value + c.cql_alpha * pen.value;
      check_finite(value, "critic");
      apply(*q, cache, grad, c.lr);
      s.critic_loss += 0.5 * value;
    }
  }

  // Advantage-weighted extraction against the policy's own value baseline.
  const Vector q_data = min_target_logged(a, b);
  Vector baseline(n);
  if (a.problem.discrete) {
    const Matrix qs = nn::clipped_double_q(nn::mlp_forward(a.q1_target, b.obs), nn::mlp_forward(a.q2_target, b.obs));
    const Matrix p = nn::softmax_rows(nn::mlp_forward(a.policy, b.obs));
    baseline = p.cwiseProduct(qs).rowwise().sum();
  } else {
    const Matrix x = critic_input(a, b.obs, beta_means(a, nn::mlp_forward(a.policy, b.obs)));
    baseline = nn::clipped_double_q(Vector(nn::mlp_forward(a.q1_target, x).col(0)),
                                    Vector(nn::mlp_forward(a.q2_target, x).col(0)));
  }
  const Vector w = awr_weights(q_data - baseline, c.temperature, c.advantage_clip);
  s.policy_loss = fit_policy(a, b, &w, c.cql_entropy);

  update_targets(a);
  return s;
}

// ---------------------------------------------------------------------------

EarlyStopper::EarlyStopper(int patience) : patience_(patience) {
  if (patience < 1) throw ConfigError("patience must be positive");
}

bool EarlyStopper::observe(double score) {
  ++evals_;
  if (evals_ == 1 || score > best_) {
    best_ = score;
    best_eval_ = evals_;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

TrainResult early_stop_loop(Trainer& trainer, const ValidationHook& hook) {
  const auto& c = trainer.agent().config;
  const int cap = c.update_steps;
  TrainResult r;
  if (!hook) {
    while (trainer.steps() < cap) trainer.step();
    r.agent = trainer.agent();
    r.best_step = r.stop_step = trainer.steps();
    return r;
  }
  EarlyStopper stopper(c.patience);
  auto evaluate = [&] {
    const double score = hook(trainer.agent());
    r.validation_scores.push_back(score);
    if (stopper.observe(score)) {
      r.agent = trainer.agent();
      r.best_step = trainer.steps();
    }
  };
  while (trainer.steps() < cap && !stopper.should_stop()) {
    trainer.step();
    if (trainer.steps() % c.eval_every == 0) evaluate();
  }
  if (stopper.evals() == 0 || (!stopper.should_stop() && trainer.steps() % c.eval_every != 0)) evaluate();
  r.stop_step = trainer.steps();
  return r;
}

TrainResult train_agent(const AlgoConfig& config, const data::TransitionSet& set, const ValidationHook& hook) {
  const TransitionMatrix data(set, config.history, config.gamma, config.formulation);
  Trainer trainer(make_agent(ProblemSpec::of(set), config), data);
  return early_stop_loop(trainer, hook);
}

TrainResult train_bc(AlgoConfig config, const data::TransitionSet& set, const ValidationHook& hook) {
  config.algorithm = Algorithm::Bc;
  return train_agent(config, set, hook);
}

TrainResult train_iql(AlgoConfig config, const data::TransitionSet& set, const ValidationHook& hook) {
  config.algorithm = Algorithm::Iql;
  return train_agent(config, set, hook);
}

TrainResult train_cql(AlgoConfig config, const data::TransitionSet& set, const ValidationHook& hook) {
  config.algorithm = Algorithm::Cql;
  return train_agent(config, set, hook);
}

}  // namespace orl::rl
