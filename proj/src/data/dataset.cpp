#include "orl/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "orl/errors.hpp"
#include "orl/random.hpp"

namespace orl::data {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Unprocessed: return "unprocessed";
    case Variant::Interpolated: return "interpolated";
    case Variant::Binned: return "binned";
  }
  return "?";
}

std::size_t AtomicLog::base_steps() const {
  std::size_t n = 0;
  for (const auto& e : episodes) n += e.records.size();
  return n;
}

std::size_t AtomicLog::decisions() const {
  std::size_t n = 0;
  for (const auto& e : episodes)
    n += static_cast<std::size_t>(std::count_if(e.records.begin(), e.records.end(),
                                                [](const AtomicRecord& r) { return r.decision; }));
  return n;
}

void validate(const AtomicLog& log) {
  for (std::size_t ei = 0; ei < log.episodes.size(); ++ei) {
    const auto& recs = log.episodes[ei].records;
    const std::string where = "episode " + std::to_string(ei) + ": ";
    if (recs.empty()) throw FormatError(where + "no records");
    if (!recs.front().decision) throw FormatError(where + "first record is not a decision");
    if (log.episodes[ei].final_obs.size() != log.obs_dim) throw FormatError(where + "bad final observation");
    for (std::size_t i = 0; i < recs.size(); ++i) {
      const auto& r = recs[i];
      if (r.t != static_cast<int>(i)) throw FormatError(where + "non-contiguous step index");
      if (r.obs.size() != log.obs_dim || r.action.size() != log.action_dim)
        throw FormatError(where + "record dimension mismatch");
      if (r.done != (i + 1 == recs.size())) throw FormatError(where + "done flag must mark only the last record");
      if (i > 0 && !r.decision && r.action != recs[i - 1].action)
        throw FormatError(where + "action changes without a decision flag at t=" + std::to_string(i));
    }
  }
}

AtomicLog collect(env::Environment& environment, env::Controller& controller, std::size_t min_steps,
                  std::uint64_t seed) {
  AtomicLog log;
  log.env = environment.kind();
  log.discrete = environment.discrete();
  log.obs_dim = environment.obs_dim();
  log.action_dim = 1;
  log.summed_feature = environment.summed_feature();
  log.seed = seed;
  std::size_t total = 0;
  for (std::uint64_t ep = 0; total < min_steps; ++ep) {
    env::Observation step_obs = environment.reset(derive_seed(seed, stream::kCollect, ep));
    env::Observation agent_obs = step_obs;
    controller.begin_episode();
    AtomicEpisode episode;
    int t = 0;
    int since = 0;
    while (!environment.done()) {
      const double action = controller.act(environment, agent_obs, since);
      auto d = environment.decision_step(action, 1.0);
      for (int i = 0; i < d.dt; ++i) {
        AtomicRecord rec;
        rec.t = t++;
        rec.obs = std::move(step_obs);
        rec.action = {action};
        rec.reward = d.atomic_rewards[static_cast<std::size_t>(i)];
        rec.decision = i == 0;
        rec.done = d.done && i + 1 == d.dt;
        episode.records.push_back(std::move(rec));
        step_obs = d.base_observations[static_cast<std::size_t>(i)];
      }
      agent_obs = std::move(d.obs);
      since = d.dt;
    }
    episode.final_obs = std::move(step_obs);
    total += episode.records.size();
    log.episodes.push_back(std::move(episode));
  }
  return log;
}

namespace {

TransitionSet empty_set(const AtomicLog& log, Variant variant, int width) {
  TransitionSet s;
  s.env = log.env;
  s.variant = variant;
  s.bin_width = width;
  s.discrete = log.discrete;
  s.obs_dim = log.obs_dim;
  s.action_dim = log.action_dim;
  s.provenance.source = "atomic-log";
  s.provenance.seed = log.seed;
  return s;
}

const env::Observation& obs_at(const AtomicEpisode& e, std::size_t t) {
  return t < e.records.size() ? e.records[t].obs : e.final_obs;
}

/// Observation the controller saw at a decision made at `t`, when the previous
/// decision was at `prev`: summed features accumulate over (prev, t].
env::Observation decision_obs(const AtomicLog& log, const AtomicEpisode& e, std::size_t prev, std::size_t t) {
  env::Observation o = obs_at(e, t);
  if (log.summed_feature && t > prev) {
    const auto f = *log.summed_feature;
    double sum = 0.0;
    for (std::size_t j = prev + 1; j <= t; ++j) sum += obs_at(e, j)[f];
    o[f] = sum;
  }
  return o;
}

/// Elementwise mean of observations with indices in [from, to].
std::vector<double> mean_obs(const AtomicEpisode& e, std::size_t from, std::size_t to, std::size_t dim) {
  std::vector<double> m(dim, 0.0);
  for (std::size_t j = from; j <= to; ++j) {
    const auto& o = obs_at(e, j);
    for (std::size_t k = 0; k < dim; ++k) m[k] += o[k];
  }
  const double n = static_cast<double>(to - from + 1);
  for (auto& v : m) v /= n;
  return m;
}

}  // namespace

std::vector<std::size_t> TransitionSet::episode_starts() const {
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (i == 0 || records[i].episode != records[i - 1].episode) starts.push_back(i);
  return starts;
}

TransitionSet to_unprocessed(const AtomicLog& log, double gamma) {
  validate(log);
  auto out = empty_set(log, Variant::Unprocessed, 0);
  out.provenance.gamma = gamma;
  for (std::size_t ei = 0; ei < log.episodes.size(); ++ei) {
    const auto& e = log.episodes[ei];
    const auto& recs = e.records;
    std::vector<std::size_t> epochs;
    for (std::size_t i = 0; i < recs.size(); ++i)
      if (recs[i].decision) epochs.push_back(i);
    epochs.push_back(recs.size());
    std::size_t prev = 0;
    for (std::size_t k = 0; k + 1 < epochs.size(); ++k) {
      const std::size_t tk = epochs[k];
      const std::size_t tn = epochs[k + 1];
      Transition tr;
      tr.episode = static_cast<std::uint32_t>(ei);
      tr.obs = decision_obs(log, e, prev, tk);
      tr.action = recs[tk].action;
      double discount = 1.0;
      for (std::size_t j = tk; j < tn; ++j) {
        tr.reward += discount * recs[j].reward;
        discount *= gamma;
      }
      tr.next_obs = decision_obs(log, e, tk, tn);
      tr.dt = static_cast<int>(tn - tk);
      tr.done = recs[tn - 1].done;
      out.records.push_back(std::move(tr));
      prev = tk;
    }
  }
  return out;
}

TransitionSet to_interpolated(const AtomicLog& log) {
  validate(log);
  auto out = empty_set(log, Variant::Interpolated, 0);
  for (std::size_t ei = 0; ei < log.episodes.size(); ++ei) {
    const auto& e = log.episodes[ei];
    for (std::size_t t = 0; t < e.records.size(); ++t) {
      const auto& r = e.records[t];
      out.records.push_back({static_cast<std::uint32_t>(ei), r.obs, r.action, r.reward, obs_at(e, t + 1), 1, r.done});
    }
  }
  return out;
}

TransitionSet to_binned(const AtomicLog& log, int width) {
  if (width < 1) throw ConfigError("to_binned: width must be at least 1");
  validate(log);
  auto out = empty_set(log, Variant::Binned, width);
  const auto w = static_cast<std::size_t>(width);
  bool warned = false;
  for (std::size_t ei = 0; ei < log.episodes.size(); ++ei) {
    const auto& e = log.episodes[ei];
    const std::size_t T = e.records.size();
    if (T < w && !warned) {
      std::cerr << "warning: to_binned: episode " << ei << " (" << T << " steps) shorter than bin width "
                << width << "; emitting a truncated bin\n";
      warned = true;
    }
    for (std::size_t tk = 0; tk < T; tk += w) {
      const std::size_t end = std::min(tk + w, T);  // exclusive
      Transition tr;
      tr.episode = static_cast<std::uint32_t>(ei);
      tr.obs = mean_obs(e, tk + 1 >= w ? tk + 1 - w : 0, tk, log.obs_dim);
      tr.action.assign(log.action_dim, 0.0);
      for (std::size_t j = tk; j < end; ++j) {
        for (std::size_t k = 0; k < log.action_dim; ++k) tr.action[k] += e.records[j].action[k];
        tr.reward += e.records[j].reward;
      }
      for (auto& a : tr.action) a /= static_cast<double>(end - tk);
      tr.next_obs = mean_obs(e, tk + 1, end, log.obs_dim);
      tr.dt = width;
      tr.done = e.records[end - 1].done;
      out.records.push_back(std::move(tr));
    }
  }
  return out;
}

TransitionSet to_binned_subsample(const AtomicLog& log, int stride) {
  if (stride < 1) throw ConfigError("to_binned_subsample: stride must be at least 1");
  validate(log);
  auto out = empty_set(log, stride == 1 ? Variant::Interpolated : Variant::Binned, stride == 1 ? 0 : stride);
  const auto s = static_cast<std::size_t>(stride);
  for (std::size_t ei = 0; ei < log.episodes.size(); ++ei) {
    const auto& e = log.episodes[ei];
    const std::size_t T = e.records.size();
    for (std::size_t tk = 0; tk < T; tk += s) {
      const std::size_t end = std::min(tk + s, T);
      Transition tr;
      tr.episode = static_cast<std::uint32_t>(ei);
      tr.obs = e.records[tk].obs;
      tr.action = e.records[tk].action;
      for (std::size_t j = tk; j < end; ++j) tr.reward += e.records[j].reward;
      tr.next_obs = obs_at(e, end);
      tr.dt = stride;
      tr.done = e.records[end - 1].done;
      out.records.push_back(std::move(tr));
    }
  }
  return out;
}

RewardStats reward_stats(const TransitionSet& set) {
  if (set.records.empty()) throw ConfigError("reward_stats: empty set");
  double mean = 0.0;
  for (const auto& r : set.records) mean += r.reward;
  mean /= static_cast<double>(set.records.size());
  double var = 0.0;
  for (const auto& r : set.records) var += (r.reward - mean) * (r.reward - mean);
  var /= static_cast<double>(set.records.size());
  return {mean, std::sqrt(var)};
}

void standardise_rewards(TransitionSet& train, const std::vector<TransitionSet*>& others) {
  const auto stats = reward_stats(train);
  if (!(stats.std > 0.0)) throw ConfigError("standardise_rewards: training rewards have zero variance");
  auto apply = [&](TransitionSet& s) {
    for (auto& r : s.records) r.reward = (r.reward - stats.mean) / stats.std;
    s.reward_mean += s.reward_std * stats.mean;
    s.reward_std *= stats.std;
  };
  for (auto* o : others)
    if (o != &train) apply(*o);
  apply(train);
}

std::vector<ReversalEvent> detect_causal_reversal(const AtomicLog& log, int width, std::size_t event_feature,
                                                  std::size_t action_index) {
  if (width < 1) throw ConfigError("detect_causal_reversal: width must be at least 1");
  if (event_feature >= log.obs_dim || action_index >= log.action_dim)
    throw ConfigError("detect_causal_reversal: feature index out of range");
  std::vector<ReversalEvent> events;
  for (std::size_t ei = 0; ei < log.episodes.size(); ++ei) {
    const auto& recs = log.episodes[ei].records;
    const int T = static_cast<int>(recs.size());
    for (int te = 0; te < T; ++te) {
      if (!(recs[static_cast<std::size_t>(te)].obs[event_feature] > 0.0)) continue;
      const int window_end = (te / width + 2) * width;  // end of the next window
      int ta = -1;
      for (int t = te + 1; t < std::min(T, window_end); ++t) {
        if (recs[static_cast<std::size_t>(t)].action[action_index] !=
            recs[static_cast<std::size_t>(t - 1)].action[action_index]) {
          ta = t;
          break;
        }
      }
      if (ta < 0) continue;
      const int action_bin = ta / width;
      const int observation_bin = (te + width - 1) / width;  // first boundary t_k >= te
      if (action_bin < observation_bin) events.push_back({ei, te, ta, action_bin, observation_bin});
    }
  }
  return events;
}

}  // namespace orl::data
