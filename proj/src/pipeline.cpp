#include "orl/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "orl/data/orld.hpp"
#include "orl/env/glucose.hpp"
#include "orl/env/gridworld.hpp"
#include "orl/errors.hpp"
#include "orl/rl/trainers.hpp"

namespace orl::pipeline {

namespace fs = std::filesystem;

namespace {

std::mutex log_mutex;

template <typename... Args>
void note(const Args&... args) {
  std::lock_guard<std::mutex> lock(log_mutex);
  (std::cerr << ... << args) << '\n';
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s + ",") {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (ch != ' ' && ch != '\t') {
      cur.push_back(ch);
    }
  }
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
  return s;
}

int parse_positive_suffix(const std::string& name, const std::string& prefix) {
  const std::string digits = name.substr(prefix.size());
  if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError("bad variant '" + name + "'");
  const int w = std::stoi(digits);
  if (w < 1) throw ConfigError("variant width must be positive in '" + name + "'");
  return w;
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(threads, n); ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  for (auto& th : pool) th.join();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<env::PatientParams> split_of(const ExperimentConfig& c, env::Split s) {
  return env::select_split(env::make_cohorts(c.seed), s);
}

std::unique_ptr<env::Environment> make_env(const ExperimentConfig& c, env::Mode mode, env::Split split) {
  if (c.env == env::EnvKind::Grid) return std::make_unique<env::GridWorld>(mode);
  return std::make_unique<env::GlucoseEnv>(split_of(c, split), mode);
}

std::unique_ptr<env::Controller> make_expert(const ExperimentConfig& c, double epsilon, std::uint64_t seed) {
  if (c.env == env::EnvKind::Grid) return std::make_unique<experts::GridBfsExpert>(epsilon, seed);
  return std::make_unique<experts::GlucosePdExpert>(epsilon, experts::PdGains{}, seed);
}

eval::Protocol calibration_protocol(const ExperimentConfig& c) {
  eval::Protocol p = c.protocol;
  p.grid_episodes = c.effective_calibration_episodes();
  p.glucose_episodes_per_patient = c.effective_calibration_episodes();
  return p;
}

const std::set<std::string>& algo_keys() {
  static const std::set<std::string> keys{
      "gamma",       "lr",        "batch_size",          "hidden_dim", "hidden_layers",  "update_steps",
      "expectile",   "temperature", "cql_alpha",         "cql_entropy", "cql_uniform_samples", "cql_backup",
      "advantage_clip", "polyak", "eval_every",          "patience",   "history"};
  return keys;
}

std::string mode_name(env::Mode m) { return env::to_string(m); }

// Per-run score cache: one "stratum,return" line per episode.
void save_scores(const fs::path& path, const eval::RunScore& s) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp);
    os << "stratum,return,excluded=" << s.excluded << "\n" << std::setprecision(17);
    for (std::size_t i = 0; i < s.returns.size(); ++i) os << s.strata[i] << ',' << s.returns[i] << '\n';
  }
  fs::rename(tmp, path);
}

std::optional<eval::RunScore> load_scores(const fs::path& path) {
  std::ifstream is(path);
  if (!is) return std::nullopt;
  eval::RunScore s;
  std::string line;
  std::getline(is, line);
  const auto eq = line.find("excluded=");
  if (eq == std::string::npos) return std::nullopt;
  s.excluded = std::stoi(line.substr(eq + 9));
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) return std::nullopt;
    s.strata.push_back(std::stoi(line.substr(0, comma)));
    s.returns.push_back(std::stod(line.substr(comma + 1)));
  }
  return s;
}

eval::RunScore cached_rollout(const fs::path& path, const std::function<eval::RunScore()>& compute) {
  if (auto s = load_scores(path)) return *s;
  auto s = compute();
  fs::create_directories(path.parent_path());
  save_scores(path, s);
  return s;
}

bool run_complete(const fs::path& dir) {
  if (!fs::exists(dir / "agent.meta")) return false;
  return KeyValues::load(dir / "agent.meta").get_or("status", "") == "complete";
}

data::TransitionSet load_variant(const ExperimentConfig& c, const std::string& variant) {
  const auto path = c.data_dir() / (variant + ".orld");
  if (!fs::exists(path)) throw ConfigError("missing dataset " + path.string() + " (run gen-data first)");
  return data::load_dataset(path);
}

// Standardises a held-out set with the constants of the training set.
void apply_train_standardisation(data::TransitionSet& test, const data::TransitionSet& train) {
  for (auto& r : test.records) r.reward = (r.reward - train.reward_mean) / train.reward_std;
  test.reward_mean = train.reward_mean;
  test.reward_std = train.reward_std;
}

struct CellKey {
  std::string algorithm;
  std::string variant;
  bool operator<(const CellKey& o) const { return std::tie(algorithm, variant) < std::tie(o.algorithm, o.variant); }
};

void attach_fqe(const ExperimentConfig& c, std::vector<eval::ResultRow>& rows) {
  std::map<CellKey, std::vector<double>> scores;
  for (const auto& key : enumerate_runs(c)) {
    const auto path = c.runs_dir() / key.name() / "fqe.meta";
    if (!fs::exists(path)) continue;
    const auto kv = KeyValues::load(path);
    if (kv.get_or("status", "") != "ok") continue;
    scores[{rl::to_string(key.algorithm), key.variant}].push_back(kv.get_double("score"));
  }
  std::uint64_t index = 0;
  for (const auto& [cell, values] : scores) {
    const double centre = eval::iqm(values);
    const auto ci = eval::bootstrap_ci(values, c.replicates, 0.95, derive_seed(c.seed, stream::kBootstrap, 1000 + index++));
    for (auto& row : rows) {
      if (row.algorithm != cell.algorithm || row.variant != cell.variant) continue;
      row.fqe = centre;
      row.fqe_ci_low = std::min(ci.low, centre);
      row.fqe_ci_high = std::max(ci.high, centre);
    }
  }
}

void normalise_rows(std::vector<eval::ResultRow>& rows) {
  const auto [random_anchor, top_anchor] = anchors(rows);
  for (auto& r : rows) r.normalised = eval::normalise_score(r.iqm, random_anchor, top_anchor);
}

int variant_rank(const std::string& v) {
  const auto spec = parse_variant(v);
  if (spec.variant == data::Variant::Unprocessed) return 0;
  if (spec.variant == data::Variant::Interpolated) return 1;
  return 2 + spec.width;
}

}  // namespace

// ---------------------------------------------------------------------------

VariantSpec parse_variant(const std::string& name) {
  VariantSpec v;
  v.name = name;
  if (name == "unprocessed") {
    v.variant = data::Variant::Unprocessed;
  } else if (name == "interpolated") {
    v.variant = data::Variant::Interpolated;
  } else if (name.rfind("binned-", 0) == 0) {
    v.variant = data::Variant::Binned;
    v.width = parse_positive_suffix(name, "binned-");
  } else if (name.rfind("subsampled-", 0) == 0) {
    v.variant = data::Variant::Binned;
    v.width = parse_positive_suffix(name, "subsampled-");
    v.subsample = true;
  } else {
    throw ConfigError("unknown variant '" + name + "' (expected unprocessed, interpolated, binned-W or subsampled-S)");
  }
  return v;
}

rl::Formulation formulation_for(const VariantSpec& v) {
  return v.variant == data::Variant::Unprocessed ? rl::Formulation::Smdp : rl::Formulation::Mdp;
}

data::TransitionSet derive_variant(const data::AtomicLog& log, const VariantSpec& v, double gamma) {
  switch (v.variant) {
    case data::Variant::Unprocessed: return data::to_unprocessed(log, gamma);
    case data::Variant::Interpolated: return data::to_interpolated(log);
    case data::Variant::Binned:
      return v.subsample ? data::to_binned_subsample(log, v.width) : data::to_binned(log, v.width);
  }
  throw ConfigError("unknown variant");
}

// ---------------------------------------------------------------------------

ExperimentConfig ExperimentConfig::from_key_values(const KeyValues& kv) {
  ExperimentConfig c;
  for (const auto& [key, value] : kv.entries()) {
    if (key == "env") {
      c.env = env::parse_env_kind(value);
    } else if (key == "seed") {
      c.seed = kv.get_uint(key);
    } else if (key == "steps") {
      c.steps = static_cast<std::size_t>(kv.get_int(key));
    } else if (key == "test_steps") {
      c.test_steps = static_cast<std::size_t>(kv.get_int(key));
    } else if (key == "seeds") {
      c.seeds = static_cast<int>(kv.get_int(key));
    } else if (key == "algorithms") {
      c.algorithms.clear();
      for (const auto& a : split_list(value)) c.algorithms.push_back(rl::parse_algorithm(a));
    } else if (key == "variants") {
      c.variants = split_list(value);
    } else if (key == "out") {
      c.out = value;
    } else if (key == "gamma") {
      c.gamma = kv.get_double(key);
    } else if (key == "band_lo") {
      c.band_lo = kv.get_double(key);
    } else if (key == "band_hi") {
      c.band_hi = kv.get_double(key);
    } else if (key == "calibration_episodes") {
      c.calibration_episodes = static_cast<int>(kv.get_int(key));
    } else if (key == "calibration_iterations") {
      c.calibration_iterations = static_cast<int>(kv.get_int(key));
    } else if (key == "eval_grid_episodes") {
      c.protocol.grid_episodes = static_cast<int>(kv.get_int(key));
    } else if (key == "eval_glucose_episodes") {
      c.protocol.glucose_episodes_per_patient = static_cast<int>(kv.get_int(key));
    } else if (key == "max_excluded_fraction") {
      c.protocol.max_excluded_fraction = kv.get_double(key);
    } else if (key == "validation_episodes") {
      c.validation_episodes = static_cast<int>(kv.get_int(key));
    } else if (key == "replicates") {
      c.replicates = static_cast<int>(kv.get_int(key));
    } else if (key == "workers") {
      c.workers = static_cast<int>(kv.get_int(key));
    } else if (key == "formulation") {
      c.formulation = rl::parse_formulation(value);
    } else if (key.rfind("train.", 0) == 0) {
      c.train_overrides.set(key.substr(6), value);
    } else if (key.rfind("fqe.", 0) == 0) {
      const auto k = key.substr(4);
      if (k == "lr") c.fqe.lr = kv.get_double(key);
      else if (k == "batch_size") c.fqe.batch_size = static_cast<int>(kv.get_int(key));
      else if (k == "hidden_dim") c.fqe.hidden_dim = static_cast<int>(kv.get_int(key));
      else if (k == "hidden_layers") c.fqe.hidden_layers = static_cast<int>(kv.get_int(key));
      else if (k == "update_steps") c.fqe.update_steps = static_cast<int>(kv.get_int(key));
      else if (k == "polyak") c.fqe.polyak = kv.get_double(key);
      else if (k == "gamma") c.fqe.gamma = kv.get_double(key);
      else throw ConfigError("unknown config key '" + key + "'");
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  return c;
}

KeyValues ExperimentConfig::to_key_values() const {
  KeyValues kv;
  kv.set("env", env::to_string(env));
  kv.set("seed", seed);
  kv.set("steps", static_cast<std::uint64_t>(effective_steps()));
  kv.set("test_steps", static_cast<std::uint64_t>(effective_test_steps()));
  kv.set("seeds", seeds);
  std::vector<std::string> algos;
  for (auto a : algorithms) algos.push_back(rl::to_string(a));
  kv.set("algorithms", join(algos));
  kv.set("variants", join(effective_variants()));
  kv.set("out", out.string());
  kv.set("gamma", gamma);
  kv.set("band_lo", band_lo);
  kv.set("band_hi", band_hi);
  kv.set("calibration_episodes", effective_calibration_episodes());
  kv.set("calibration_iterations", calibration_iterations);
  kv.set("eval_grid_episodes", protocol.grid_episodes);
  kv.set("eval_glucose_episodes", protocol.glucose_episodes_per_patient);
  kv.set("max_excluded_fraction", protocol.max_excluded_fraction);
  kv.set("validation_episodes", validation_episodes);
  kv.set("replicates", replicates);
  kv.set("workers", workers);
  if (formulation) kv.set("formulation", rl::to_string(*formulation));
  for (const auto& [k, v] : train_overrides.entries()) kv.set("train." + k, v);
  kv.set("fqe.lr", fqe.lr);
  kv.set("fqe.batch_size", fqe.batch_size);
  kv.set("fqe.hidden_dim", fqe.hidden_dim);
  kv.set("fqe.hidden_layers", fqe.hidden_layers);
  kv.set("fqe.update_steps", fqe.update_steps);
  kv.set("fqe.polyak", fqe.polyak);
  kv.set("fqe.gamma", fqe.gamma);
  return kv;
}

void ExperimentConfig::validate() const {
  if (seeds < 1) throw ConfigError("seeds must be positive");
  if (algorithms.empty()) throw ConfigError("no algorithms selected");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  if (!(band_lo >= 0.0 && band_lo <= band_hi && band_hi <= 1.0)) throw ConfigError("calibration band must satisfy 0 <= lo <= hi <= 1");
  if (calibration_episodes < 0 || calibration_iterations < 0) throw ConfigError("calibration settings must be non-negative");
  if (protocol.grid_episodes < 1 || protocol.glucose_episodes_per_patient < 1)
    throw ConfigError("evaluation episode counts must be positive");
  if (validation_episodes < 1) throw ConfigError("validation_episodes must be positive");
  if (replicates < 1) throw ConfigError("replicates must be positive");
  if (workers < 1) throw ConfigError("workers must be positive");
  for (const auto& name : effective_variants()) {
    const auto v = parse_variant(name);
    if (env == env::EnvKind::Grid && v.variant == data::Variant::Binned && !v.subsample)
      throw ConfigError("grid actions are discrete and cannot be averaged; use subsampled-S instead of " + name);
    if (formulation && *formulation != formulation_for(v))
      throw ConfigError("variant " + name + " requires the " + rl::to_string(formulation_for(v)) +
                        " formulation, not " + rl::to_string(*formulation));
  }
  for (const auto& [key, value] : train_overrides.entries()) {
    const auto dot = key.find('.');
    const std::string field = dot == std::string::npos ? key : key.substr(dot + 1);
    if (dot != std::string::npos) rl::parse_algorithm(key.substr(0, dot));
    if (!algo_keys().count(field)) throw ConfigError("unknown training key 'train." + key + "'");
  }
  for (const auto& key : enumerate_runs(*this)) algo_config_for(*this, key).validate();
  fqe.validate();
}

std::size_t ExperimentConfig::effective_steps() const {
  if (steps > 0) return steps;
  return env == env::EnvKind::Grid ? 50000 : 200000;
}

std::size_t ExperimentConfig::effective_test_steps() const {
  if (test_steps > 0) return test_steps;
  return 50000;
}

int ExperimentConfig::effective_calibration_episodes() const {
  if (calibration_episodes > 0) return calibration_episodes;
  return env == env::EnvKind::Grid ? 200 : 5;
}

std::vector<std::string> ExperimentConfig::effective_variants() const {
  if (!variants.empty()) return variants;
  if (env == env::EnvKind::Grid) return {"unprocessed", "interpolated", "subsampled-2"};
  return {"unprocessed", "interpolated", "binned-12", "binned-24"};
}

fs::path ExperimentConfig::env_dir() const { return out / env::to_string(env); }

void write_config_echo(const ExperimentConfig& config, const std::string& command) {
  fs::create_directories(config.env_dir());
  config.to_key_values().save_atomic(config.env_dir() / ("config_" + command + ".echo"));
}

// ---------------------------------------------------------------------------

std::string RunKey::name() const { return rl::to_string(algorithm) + "-" + variant + "-s" + std::to_string(seed_index); }
std::string RunKey::cell() const { return rl::to_string(algorithm) + "-" + variant; }

std::vector<RunKey> enumerate_runs(const ExperimentConfig& config) {
  std::vector<RunKey> runs;
  for (auto a : config.algorithms)
    for (const auto& v : config.effective_variants())
      for (int s = 0; s < config.seeds; ++s) runs.push_back({a, v, s});
  return runs;
}

std::uint64_t run_seed(const ExperimentConfig& config, int seed_index) {
  return derive_seed(config.seed, stream::kInit, static_cast<std::uint64_t>(seed_index));
}

rl::AlgoConfig algo_config_for(const ExperimentConfig& config, const RunKey& key) {
  auto c = rl::AlgoConfig::defaults(config.env, key.algorithm);
  c.gamma = config.gamma;
  KeyValues generic;
  KeyValues specific;
  const std::string prefix = rl::to_string(key.algorithm) + ".";
  for (const auto& [k, v] : config.train_overrides.entries()) {
    if (k.find('.') == std::string::npos) generic.set(k, v);
    else if (k.rfind(prefix, 0) == 0) specific.set(k.substr(prefix.size()), v);
  }
  c.apply_key_values(generic);
  c.apply_key_values(specific);
  c.formulation = formulation_for(parse_variant(key.variant));
  c.seed = run_seed(config, key.seed_index);
  return c;
}

// ---------------------------------------------------------------------------

GenDataResult gen_data(const ExperimentConfig& config) {
  config.validate();
  const auto dir = config.data_dir();
  fs::create_directories(dir);
  const auto start = std::chrono::steady_clock::now();

  if (config.env == env::EnvKind::Glucose) env::save_roster_csv(dir / "roster.csv", env::make_cohorts(config.seed));

  // Calibration runs on the validation cohort (glucose) or fresh grid layouts.
  const auto protocol = calibration_protocol(config);
  const std::uint64_t episode_seed = derive_seed(config.seed, stream::kCalibration, 0);
  auto calib_env = make_env(config, env::Mode::Irregular, env::Split::Validation);
  env::RandomController random(derive_seed(config.seed, stream::kCalibration, 1));
  const double random_score = eval::rollout_eval(*calib_env, random, protocol, episode_seed).mean();
  auto score_at = [&](double eps) {
    auto expert = make_expert(config, eps, derive_seed(config.seed, stream::kExpert, 0));
    return eval::rollout_eval(*calib_env, *expert, protocol, episode_seed).mean();
  };
  GenDataResult result;
  result.calibration =
      experts::calibrate_expert(score_at, random_score, config.band_lo, config.band_hi, config.calibration_iterations);
  {
    std::ofstream os(dir / "calibration.csv");
    experts::write_calibration_csv(os, result.calibration);
  }
  KeyValues info;
  info.set("epsilon", result.calibration.epsilon);
  info.set("fraction", result.calibration.fraction);
  info.set("random_score", result.calibration.random_score);
  info.set("best_score", result.calibration.best_score);
  info.set("in_band", result.calibration.in_band ? 1 : 0);
  info.save_atomic(dir / "expert.meta");
  note("[gen-data] expert epsilon ", result.calibration.epsilon, " (fraction ", result.calibration.fraction, ")");

  auto train_env = make_env(config, env::Mode::Irregular, env::Split::Train);
  auto expert = make_expert(config, result.calibration.epsilon, derive_seed(config.seed, stream::kExpert, 1));
  const auto log = data::collect(*train_env, *expert, config.effective_steps(), derive_seed(config.seed, stream::kCollect, 0));
  data::validate(log);

  for (const auto& name : config.effective_variants()) {
    auto set = derive_variant(log, parse_variant(name), config.gamma);
    data::standardise_rewards(set);
    set.provenance.source = "train-log";
    set.provenance.seed = config.seed;
    set.provenance.gamma = config.gamma;
    const auto path = dir / (name + ".orld");
    data::save_dataset(path, set);
    result.files.push_back(path);
    note("[gen-data] ", path.string(), ": ", set.records.size(), " transitions");
  }
  note("[gen-data] done in ", seconds_since(start), " s");
  return result;
}

ExpertInfo load_expert_info(const ExperimentConfig& config) {
  const auto path = config.data_dir() / "expert.meta";
  if (!fs::exists(path)) throw ConfigError("missing " + path.string() + " (run gen-data first)");
  const auto kv = KeyValues::load(path);
  return {kv.get_double("epsilon"), kv.get_double("random_score"), kv.get_double("best_score"),
          kv.get_int("in_band") != 0};
}

// ---------------------------------------------------------------------------

TrainSummary train_all(const ExperimentConfig& config) {
  config.validate();
  const auto runs = enumerate_runs(config);
  std::map<std::string, data::TransitionSet> sets;
  for (const auto& v : config.effective_variants()) sets.emplace(v, load_variant(config, v));

  std::vector<env::PatientParams> validation;
  if (config.env == env::EnvKind::Glucose) validation = split_of(config, env::Split::Validation);

  TrainSummary summary;
  std::mutex m;
  parallel_for(runs.size(), config.workers, [&](std::size_t i) {
    const auto& key = runs[i];
    const auto dir = config.runs_dir() / key.name();
    if (run_complete(dir)) {
      std::lock_guard<std::mutex> lock(m);
      ++summary.skipped;
      return;
    }
    const auto start = std::chrono::steady_clock::now();
    try {
      const auto algo = algo_config_for(config, key);
      rl::ValidationHook hook;
      if (config.env == env::EnvKind::Glucose) {
        hook = [&](const rl::AgentBundle& agent) {
          env::GlucoseEnv val(validation, env::Mode::Irregular);
          rl::AgentController controller(agent);
          eval::Protocol p = config.protocol;
          p.glucose_episodes_per_patient = config.validation_episodes;
          return eval::rollout_eval(val, controller, p, derive_seed(config.seed, stream::kValidation, 0)).mean();
        };
      }
      const auto result = rl::train_agent(algo, sets.at(key.variant), hook);
      std::ostringstream scores;
      scores << std::setprecision(10);
      for (std::size_t k = 0; k < result.validation_scores.size(); ++k)
        scores << (k ? "," : "") << result.validation_scores[k];
      rl::save_agent(dir, result.agent,
                     {{"status", "complete"},
                      {"dataset", (config.data_dir() / (key.variant + ".orld")).string()},
                      {"variant", key.variant},
                      {"best_step", std::to_string(result.best_step)},
                      {"stop_step", std::to_string(result.stop_step)},
                      {"validation_scores", scores.str()}});
      fs::remove(dir / "failed.txt");
      note("[train] ", key.name(), " done in ", seconds_since(start), " s (best step ", result.best_step, ")");
      std::lock_guard<std::mutex> lock(m);
      ++summary.completed;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      fs::create_directories(dir);
      std::ofstream(dir / "failed.txt") << e.what() << "\n";
      note("[train] ", key.name(), " FAILED: ", e.what());
      std::lock_guard<std::mutex> lock(m);
      summary.failures.push_back(key.name() + ": " + e.what());
    }
  });
  return summary;
}

// ---------------------------------------------------------------------------

std::pair<double, double> anchors(const std::vector<eval::ResultRow>& rows) {
  std::optional<double> random_anchor;
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& r : rows) {
    if (r.algorithm == "random" && r.mode == "irregular") random_anchor = r.iqm;
    top = std::max(top, r.iqm);
  }
  if (!random_anchor) throw FormatError("results: no random-policy row in irregular mode");
  return {*random_anchor, top};
}

EvalSummary eval_all(const ExperimentConfig& config) {
  config.validate();
  const auto expert = load_expert_info(config);
  const auto runs = enumerate_runs(config);
  const std::uint64_t eval_seed = derive_seed(config.seed, stream::kEval, 0);
  const std::vector<env::Mode> modes{env::Mode::Regular, env::Mode::Irregular};

  EvalSummary summary;
  std::vector<std::array<std::optional<eval::RunScore>, 2>> scores(runs.size());
  std::mutex m;
  parallel_for(runs.size(), config.workers, [&](std::size_t i) {
    const auto dir = config.runs_dir() / runs[i].name();
    if (!run_complete(dir)) {
      std::lock_guard<std::mutex> lock(m);
      summary.missing.push_back(runs[i].name());
      return;
    }
    std::optional<rl::AgentBundle> agent;
    for (std::size_t k = 0; k < modes.size(); ++k) {
      scores[i][k] = cached_rollout(dir / ("eval_" + mode_name(modes[k]) + ".csv"), [&] {
        if (!agent) agent = rl::load_agent(dir);
        auto environment = make_env(config, modes[k], env::Split::Test);
        rl::AgentController controller(*agent);
        return eval::rollout_eval(*environment, controller, config.protocol, eval_seed);
      });
    }
  });
  std::sort(summary.missing.begin(), summary.missing.end());

  std::map<CellKey, std::array<std::vector<eval::RunScore>, 2>> cells;
  for (std::size_t i = 0; i < runs.size(); ++i)
    for (std::size_t k = 0; k < modes.size(); ++k)
      if (scores[i][k]) cells[{rl::to_string(runs[i].algorithm), runs[i].variant}][k].push_back(*scores[i][k]);

  std::uint64_t index = 0;
  auto add_row = [&](const std::string& cell_id, const std::string& algo, const std::string& variant,
                     std::size_t k, const std::vector<eval::RunScore>& group) {
    eval::ResultRow row;
    row.cell_id = cell_id;
    row.algorithm = algo;
    row.variant = variant;
    row.mode = mode_name(modes[k]);
    row.seeds = static_cast<int>(group.size());
    row.iqm = eval::aggregate_iqm(group);
    const auto ci = eval::stratified_bootstrap_ci(group, config.replicates, 0.95,
                                                  derive_seed(config.seed, stream::kBootstrap, index++));
    row.ci_low = std::min(ci.low, row.iqm);
    row.ci_high = std::max(ci.high, row.iqm);
    summary.rows.push_back(row);
  };
  for (const auto& [cell, groups] : cells)
    for (std::size_t k = 0; k < modes.size(); ++k)
      if (!groups[k].empty()) add_row(cell.algorithm + "-" + cell.variant, cell.algorithm, cell.variant, k, groups[k]);

  const auto baseline_dir = config.env_dir() / "baselines";
  for (std::size_t k = 0; k < modes.size(); ++k) {
    auto run_baseline = [&](const std::string& name, const std::function<std::unique_ptr<env::Controller>()>& make) {
      return cached_rollout(baseline_dir / (name + "_" + mode_name(modes[k]) + ".csv"), [&] {
        auto environment = make_env(config, modes[k], env::Split::Test);
        auto controller = make();
        return eval::rollout_eval(*environment, *controller, config.protocol, eval_seed);
      });
    };
    const auto e = run_baseline("expert", [&] {
      return make_expert(config, expert.epsilon, derive_seed(config.seed, stream::kExpert, 3));
    });
    add_row("expert", "expert", "behaviour", k, {e});
    const auto r = run_baseline("random", [&]() -> std::unique_ptr<env::Controller> {
      return std::make_unique<env::RandomController>(derive_seed(config.seed, stream::kEval, 1));
    });
    add_row("random", "random", "none", k, {r});
  }

  normalise_rows(summary.rows);
  attach_fqe(config, summary.rows);
  eval::save_results_csv(config.results_path(), summary.rows);
  return summary;
}

// ---------------------------------------------------------------------------

FqeSummary fqe_all(const ExperimentConfig& config) {
  config.validate();
  FqeSummary summary;
  if (config.env != env::EnvKind::Glucose) {
    note("[fqe] skipped: fitted Q evaluation runs on glucose cells only");
    return summary;
  }
  if (!fs::exists(config.results_path())) throw ConfigError("missing " + config.results_path().string() + " (run eval first)");
  const auto expert = load_expert_info(config);
  const auto fqe_dir = config.env_dir() / "fqe";
  fs::create_directories(fqe_dir);

  std::map<std::string, data::TransitionSet> train_sets;
  std::map<std::string, data::TransitionSet> test_sets;
  std::optional<data::AtomicLog> test_log;
  for (const auto& v : config.effective_variants()) {
    train_sets.emplace(v, load_variant(config, v));
    const auto path = fqe_dir / ("test-" + v + ".orld");
    if (fs::exists(path)) {
      test_sets.emplace(v, data::load_dataset(path));
      continue;
    }
    if (!test_log) {
      auto environment = make_env(config, env::Mode::Irregular, env::Split::Test);
      auto behaviour = make_expert(config, expert.epsilon, derive_seed(config.seed, stream::kExpert, 2));
      test_log = data::collect(*environment, *behaviour, config.effective_test_steps(),
                               derive_seed(config.seed, stream::kCollect, 1));
    }
    auto set = derive_variant(*test_log, parse_variant(v), config.gamma);
    apply_train_standardisation(set, train_sets.at(v));
    set.provenance.source = "test-log";
    set.provenance.seed = config.seed;
    set.provenance.gamma = config.gamma;
    data::save_dataset(path, set);
    test_sets.emplace(v, data::load_dataset(path));
  }

  const auto runs = enumerate_runs(config);
  std::mutex m;
  parallel_for(runs.size(), config.workers, [&](std::size_t i) {
    const auto& key = runs[i];
    const auto dir = config.runs_dir() / key.name();
    if (!run_complete(dir)) return;
    const auto meta_path = dir / "fqe.meta";
    if (fs::exists(meta_path)) {
      std::lock_guard<std::mutex> lock(m);
      if (KeyValues::load(meta_path).get_or("status", "") == "ok") ++summary.scored;
      else summary.failures.push_back(key.name());
      return;
    }
    const auto start = std::chrono::steady_clock::now();
    KeyValues meta;
    try {
      const auto agent = rl::load_agent(dir);
      auto fc = config.fqe;
      fc.formulation = formulation_for(parse_variant(key.variant));
      fc.seed = run_seed(config, key.seed_index);
      const auto model = ope::train_fqe(fc, agent, train_sets.at(key.variant));
      const double score = ope::fqe_score(model, agent, test_sets.at(key.variant));
      meta.set("status", "ok");
      meta.set("score", score);
      note("[fqe] ", key.name(), " score ", score, " in ", seconds_since(start), " s");
      std::lock_guard<std::mutex> lock(m);
      ++summary.scored;
    } catch (const std::exception& e) {
      meta.set("status", "failed");
      meta.set("error", std::string(e.what()));
      note("[fqe] ", key.name(), " FAILED: ", e.what());
      std::lock_guard<std::mutex> lock(m);
      summary.failures.push_back(key.name() + ": " + e.what());
    }
    meta.save_atomic(meta_path);
  });

  summary.rows = eval::load_results_csv(config.results_path());
  attach_fqe(config, summary.rows);
  eval::save_results_csv(config.results_path(), summary.rows);
  return summary;
}

// ---------------------------------------------------------------------------

ReportSummary report(const fs::path& results_path, std::ostream& os) {
  const auto rows = eval::load_results_csv(results_path);
  ReportSummary summary;
  std::tie(summary.random_anchor, summary.top_anchor) = anchors(rows);

  const auto dir = results_path.parent_path();
  std::ofstream returns_csv(dir / "report_returns.csv");
  returns_csv << "mode,algorithm,variant,iqm,ci_low,ci_high,normalised\n" << std::setprecision(10);

  os << std::fixed << std::setprecision(3);
  os << "Returns (IQM [95% CI]; normalised: random = " << summary.random_anchor << ", top = " << summary.top_anchor
     << ")\n";
  for (const std::string mode : {"regular", "irregular"}) {
    os << "\n[" << mode << "]\n";
    std::map<std::string, std::vector<const eval::ResultRow*>> by_algo;
    for (const auto& r : rows)
      if (r.mode == mode) by_algo[r.algorithm].push_back(&r);
    for (auto& [algo, list] : by_algo) {
      const bool learner = algo != "expert" && algo != "random";
      if (learner)
        std::sort(list.begin(), list.end(),
                  [](auto* a, auto* b) { return variant_rank(a->variant) < variant_rank(b->variant); });
      for (const auto* r : list) {
        os << "  " << std::left << std::setw(8) << algo << std::setw(15) << r->variant << std::right << std::setw(12)
           << r->iqm << " [" << r->ci_low << ", " << r->ci_high << "]  norm " << r->normalised << '\n';
        returns_csv << mode << ',' << algo << ',' << r->variant << ',' << r->iqm << ',' << r->ci_low << ','
                    << r->ci_high << ',' << r->normalised << '\n';
      }
      if (!learner || list.size() < 2) continue;
      bool ok = true;
      for (std::size_t k = 1; k < list.size(); ++k) ok = ok && list[k - 1]->iqm >= list[k]->iqm;
      os << "  ordering unprocessed >= interpolated >= binned for " << algo << ": " << (ok ? "PASS" : "FAIL") << '\n';
      if (!ok) summary.ordering_failures.push_back(mode + "/" + algo);
    }
  }

  std::vector<eval::CalibrationInput> inputs;
  for (const auto& r : rows) {
    if (r.mode != "irregular" || !r.fqe) continue;
    inputs.push_back({r.cell_id, r.algorithm, r.variant, r.normalised,
                      eval::normalise_score(*r.fqe, summary.random_anchor, summary.top_anchor)});
  }
  summary.calibration = eval::calibration_table(inputs);
  if (summary.calibration.empty()) {
    os << "\nCalibration table omitted: no FQE columns in " << results_path.string() << '\n';
    return summary;
  }
  std::ofstream cal_csv(dir / "report_calibration.csv");
  cal_csv << "cell_id,algorithm,variant,true_normalised,predicted_normalised,gap\n" << std::setprecision(10);
  os << "\nFQE calibration (irregular deployment, normalised)\n";
  std::map<std::string, std::pair<double, int>> per_variant;
  for (const auto& c : summary.calibration) {
    os << "  " << std::left << std::setw(24) << c.cell_id << std::right << " true " << std::setw(8) << c.true_normalised
       << "  predicted " << std::setw(8) << c.predicted_normalised << "  gap " << std::setw(8) << c.gap << '\n';
    cal_csv << c.cell_id << ',' << c.algorithm << ',' << c.variant << ',' << c.true_normalised << ','
            << c.predicted_normalised << ',' << c.gap << '\n';
    per_variant[c.variant].first += c.gap;
    per_variant[c.variant].second += 1;
  }
  os << "  mean gap per variant:";
  for (const auto& [v, acc] : per_variant) os << ' ' << v << '=' << acc.first / acc.second;
  os << '\n';
  return summary;
}

}  // namespace orl::pipeline
