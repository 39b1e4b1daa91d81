#include "orl/rl/agent.hpp"

#include <algorithm>
#include <cmath>

#include "orl/errors.hpp"
#include "orl/kv.hpp"
#include "orl/nn/beta_head.hpp"
#include "orl/nn/checkpoint.hpp"

namespace orl::rl {

ProblemSpec ProblemSpec::of(const data::TransitionSet& set) {
  ProblemSpec p;
  p.env = set.env;
  p.discrete = set.discrete;
  p.obs_dim = set.obs_dim;
  if (set.env == env::EnvKind::Grid) {
    p.action_count = 4;
    p.action_low = 0.0;
    p.action_high = 3.0;
  } else {
    p.action_count = 1;
    p.action_low = 0.0;
    p.action_high = 0.5;
  }
  return p;
}

namespace {

NetParams build(std::size_t in, std::size_t out, const AlgoConfig& c, Rng& rng) {
  std::vector<std::size_t> dims{in};
  for (int i = 0; i < c.hidden_layers; ++i) dims.push_back(static_cast<std::size_t>(c.hidden_dim));
  dims.push_back(out);
  return nn::make_mlp(dims, rng);
}

}  // namespace

AgentBundle make_agent(const ProblemSpec& problem, const AlgoConfig& config) {
  config.validate();
  if (problem.obs_dim == 0) throw ConfigError("make_agent: zero observation dimension");
  AgentBundle a;
  a.problem = problem;
  a.config = config;
  Rng rng = make_rng(config.seed, stream::kInit);
  a.policy = build(a.encoded_dim(), problem.discrete ? problem.action_count : 2, config, rng);
  if (config.algorithm != Algorithm::Bc) {
    a.q1 = build(a.critic_input_dim(), a.critic_output_dim(), config, rng);
    a.q2 = build(a.critic_input_dim(), a.critic_output_dim(), config, rng);
    a.q1_target = nn::clone_parameters(a.q1);
    a.q2_target = nn::clone_parameters(a.q2);
  }
  if (config.algorithm == Algorithm::Iql) a.value = build(a.encoded_dim(), 1, config, rng);
  return a;
}

Vector encode(std::size_t obs_dim, int history, std::span<const env::Observation> frames) {
  const auto h = static_cast<std::size_t>(history);
  Vector out = Vector::Zero(static_cast<Eigen::Index>(obs_dim * h));
  const std::size_t used = std::min(h, frames.size());
  const std::size_t first_frame = frames.size() - used;
  const std::size_t first_slot = h - used;
  for (std::size_t k = 0; k < used; ++k) {
    const auto& f = frames[first_frame + k];
    if (f.size() != obs_dim) throw ConfigError("encode: observation dimension mismatch");
    for (std::size_t j = 0; j < obs_dim; ++j)
      out(static_cast<Eigen::Index>((first_slot + k) * obs_dim + j)) = f[j];
  }
  return out;
}

Vector encode(const AgentBundle& agent, std::span<const env::Observation> frames) {
  return encode(agent.problem.obs_dim, agent.config.history, frames);
}

double scale_action(const ProblemSpec& p, double action) {
  return 2.0 * (action - p.action_low) / (p.action_high - p.action_low) - 1.0;
}

Matrix critic_input(const AgentBundle& agent, const Matrix& encoded, const Vector& actions) {
  if (agent.problem.discrete) return encoded;
  Matrix x(encoded.rows(), encoded.cols() + 1);
  x.leftCols(encoded.cols()) = encoded;
  for (Eigen::Index i = 0; i < encoded.rows(); ++i) x(i, encoded.cols()) = scale_action(agent.problem, actions(i));
  return x;
}

int argmax_lowest(const Eigen::Ref<const Vector>& logits) {
  int best = 0;
  for (Eigen::Index i = 1; i < logits.size(); ++i)
    if (logits(i) > logits(best)) best = static_cast<int>(i);
  return best;
}

Vector deterministic_actions(const AgentBundle& agent, const Matrix& encoded) {
  const Matrix out = nn::mlp_forward(agent.policy, encoded);
  Vector a(out.rows());
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    if (agent.problem.discrete) {
      a(i) = argmax_lowest(out.row(i).transpose());
    } else {
      a(i) = nn::BetaHead::from_raw(out(i, 0), out(i, 1), agent.problem.action_low, agent.problem.action_high).mean();
    }
  }
  return a;
}

double deterministic_action(const AgentBundle& agent, const Vector& encoded) {
  Matrix row = encoded.transpose();
  return deterministic_actions(agent, row)(0);
}

double AgentController::act(const env::Environment&, const env::Observation& obs, int) {
  frames_.push_back(obs);
  while (frames_.size() > static_cast<std::size_t>(agent_.config.history)) frames_.pop_front();
  const std::vector<env::Observation> frames(frames_.begin(), frames_.end());
  return deterministic_action(agent_, encode(agent_, frames));
}

void save_agent(const std::filesystem::path& dir, const AgentBundle& agent,
                const std::vector<std::pair<std::string, std::string>>& extra_meta) {
  std::filesystem::create_directories(dir);
  nn::save_checkpoint(dir / "policy.onnp", agent.policy);
  if (!agent.q1.layers.empty()) {
    nn::save_checkpoint(dir / "q1.onnp", agent.q1);
    nn::save_checkpoint(dir / "q2.onnp", agent.q2);
    nn::save_checkpoint(dir / "q1_target.onnp", agent.q1_target);
    nn::save_checkpoint(dir / "q2_target.onnp", agent.q2_target);
  }
  if (!agent.value.layers.empty()) nn::save_checkpoint(dir / "value.onnp", agent.value);
  KeyValues meta;
  agent.config.to_key_values(meta, "config.");
  meta.set("problem.env", env::to_string(agent.problem.env));
  meta.set("problem.discrete", agent.problem.discrete ? 1 : 0);
  meta.set("problem.obs_dim", static_cast<std::uint64_t>(agent.problem.obs_dim));
  meta.set("problem.action_count", static_cast<std::uint64_t>(agent.problem.action_count));
  meta.set("problem.action_low", agent.problem.action_low);
  meta.set("problem.action_high", agent.problem.action_high);
  meta.set("trained_steps", agent.trained_steps);
  for (const auto& [k, v] : extra_meta) meta.set(k, v);
  meta.save_atomic(dir / "agent.meta");
}

AgentBundle load_agent(const std::filesystem::path& dir) {
  const auto meta = KeyValues::load(dir / "agent.meta");
  AgentBundle a;
  a.config.apply_key_values(meta, "config.");
  a.problem.env = env::parse_env_kind(meta.get("problem.env"));
  a.problem.discrete = meta.get_int("problem.discrete") != 0;
  a.problem.obs_dim = static_cast<std::size_t>(meta.get_int("problem.obs_dim"));
  a.problem.action_count = static_cast<std::size_t>(meta.get_int("problem.action_count"));
  a.problem.action_low = meta.get_double("problem.action_low");
  a.problem.action_high = meta.get_double("problem.action_high");
  a.trained_steps = static_cast<int>(meta.get_int("trained_steps"));
  a.policy = nn::load_checkpoint(dir / "policy.onnp");
  if (std::filesystem::exists(dir / "q1.onnp")) {
    a.q1 = nn::load_checkpoint(dir / "q1.onnp");
    a.q2 = nn::load_checkpoint(dir / "q2.onnp");
    a.q1_target = nn::load_checkpoint(dir / "q1_target.onnp");
    a.q2_target = nn::load_checkpoint(dir / "q2_target.onnp");
  }
  if (std::filesystem::exists(dir / "value.onnp")) a.value = nn::load_checkpoint(dir / "value.onnp");
  if (a.policy.input_dim() != a.encoded_dim()) throw FormatError("load_agent: policy input does not match metadata");
  return a;
}

// ---------------------------------------------------------------------------

TransitionMatrix::TransitionMatrix(const data::TransitionSet& set, int history, double gamma,
                                   Formulation formulation) {
  if (set.records.empty()) throw ConfigError("TransitionMatrix: empty transition set");
  if (history < 1) throw ConfigError("TransitionMatrix: history must be positive");
  const std::size_t n = set.records.size();
  const std::size_t d = set.obs_dim;
  const auto h = static_cast<std::size_t>(history);
  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(d * h);
  obs_ = Matrix::Zero(rows, cols);
  next_obs_ = Matrix::Zero(rows, cols);
  actions_.resize(rows);
  rewards_.resize(rows);
  dts_.resize(n);
  done_.resize(n);
  starts_ = set.episode_starts();

  std::size_t start = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = set.records[i];
    if (i == 0 || r.episode != set.records[i - 1].episode) start = i;
    if (r.obs.size() != d || r.next_obs.size() != d) throw ConfigError("TransitionMatrix: record dimension mismatch");
    const auto row = static_cast<Eigen::Index>(i);
    // Current frames: records [max(start, i−h+1), i]; next frames shift by one and end in next_obs.
    for (std::size_t slot = 0; slot < h; ++slot) {
      const std::ptrdiff_t back = static_cast<std::ptrdiff_t>(h - 1 - slot);
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(i) - back;
      if (src >= static_cast<std::ptrdiff_t>(start)) {
        const auto& o = set.records[static_cast<std::size_t>(src)].obs;
        for (std::size_t j = 0; j < d; ++j) obs_(row, static_cast<Eigen::Index>(slot * d + j)) = o[j];
      }
      const std::ptrdiff_t nsrc = static_cast<std::ptrdiff_t>(i) + 1 - back;
      const std::vector<double>* no = nullptr;
      if (nsrc == static_cast<std::ptrdiff_t>(i) + 1)
        no = &r.next_obs;
      else if (nsrc >= static_cast<std::ptrdiff_t>(start))
        no = &set.records[static_cast<std::size_t>(nsrc)].obs;
      if (no)
        for (std::size_t j = 0; j < d; ++j) next_obs_(row, static_cast<Eigen::Index>(slot * d + j)) = (*no)[j];
    }
    actions_(row) = r.action.at(0);
    rewards_(row) = r.reward;
    dts_[i] = r.dt;
    done_[i] = r.done ? 1 : 0;
  }
  set_discount(gamma, formulation);
}

void TransitionMatrix::set_discount(double gamma, Formulation formulation) {
  discounts_.resize(rewards_.size());
  for (std::size_t i = 0; i < dts_.size(); ++i) {
    const double g = formulation == Formulation::Smdp ? std::pow(gamma, static_cast<double>(dts_[i])) : gamma;
    discounts_(static_cast<Eigen::Index>(i)) = done_[i] ? 0.0 : g;
  }
}

void TransitionMatrix::set_rewards(Vector r) {
  if (r.size() != rewards_.size()) throw ConfigError("set_rewards: size mismatch");
  rewards_ = std::move(r);
}

Batch TransitionMatrix::gather(std::span<const std::size_t> rows) const {
  Batch b;
  const auto n = static_cast<Eigen::Index>(rows.size());
  b.obs.resize(n, obs_.cols());
  b.next_obs.resize(n, next_obs_.cols());
  b.actions.resize(n);
  b.rewards.resize(n);
  b.discounts.resize(n);
  b.action_index.resize(rows.size());
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto i = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(k)]);
    b.obs.row(k) = obs_.row(i);
    b.next_obs.row(k) = next_obs_.row(i);
    b.actions(k) = actions_(i);
    b.rewards(k) = rewards_(i);
    b.discounts(k) = discounts_(i);
    b.action_index[static_cast<std::size_t>(k)] = static_cast<int>(std::lround(actions_(i)));
  }
  return b;
}

Batch TransitionMatrix::sample(Rng& rng, std::size_t batch_size) const {
  std::vector<std::size_t> rows(batch_size);
  for (auto& r : rows) r = static_cast<std::size_t>(uniform_index(rng, size()));
  return gather(rows);
}

Matrix TransitionMatrix::initial_observations() const {
  Matrix out(static_cast<Eigen::Index>(starts_.size()), obs_.cols());
  for (std::size_t k = 0; k < starts_.size(); ++k)
    out.row(static_cast<Eigen::Index>(k)) = obs_.row(static_cast<Eigen::Index>(starts_[k]));
  return out;
}

}  // namespace orl::rl
