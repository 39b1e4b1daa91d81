#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "orl/data/dataset.hpp"
#include "orl/eval/results.hpp"
#include "orl/eval/stats.hpp"
#include "orl/experts/experts.hpp"
#include "orl/kv.hpp"
#include "orl/ope/fqe.hpp"
#include "orl/rl/config.hpp"

namespace orl::pipeline {

/// A named dataset variant: "unprocessed", "interpolated", "binned-W" or "subsampled-S".
struct VariantSpec {
  std::string name;
  data::Variant variant = data::Variant::Unprocessed;
  int width = 0;
  bool subsample = false;
};

VariantSpec parse_variant(const std::string& name);
/// SMDP for the unprocessed variant, MDP for everything else.
rl::Formulation formulation_for(const VariantSpec& v);
data::TransitionSet derive_variant(const data::AtomicLog& log, const VariantSpec& v, double gamma);

struct ExperimentConfig {
  env::EnvKind env = env::EnvKind::Grid;
  std::uint64_t seed = 7;
  std::size_t steps = 0;       // atomic steps in the training log; 0 = environment default
  std::size_t test_steps = 0;  // atomic steps in the held-out FQE log; 0 = default
  int seeds = 10;
  std::vector<rl::Algorithm> algorithms{rl::Algorithm::Bc, rl::Algorithm::Iql, rl::Algorithm::Cql};
  std::vector<std::string> variants;  // empty = environment default
  std::filesystem::path out = "orl_out";
  double gamma = 0.99;
  double band_lo = 0.7;
  double band_hi = 0.8;
  int calibration_episodes = 0;  // grid: episodes; glucose: per validation patient; 0 = default
  int calibration_iterations = 12;
  eval::Protocol protocol;
  int validation_episodes = 30;  // per validation patient, early stopping
  int replicates = 10000;
  int workers = 1;
  std::optional<rl::Formulation> formulation;
  KeyValues train_overrides;  // "<key>" or "<algorithm>.<key>"
  ope::FqeConfig fqe;

  static ExperimentConfig from_key_values(const KeyValues& kv);
  KeyValues to_key_values() const;
  void validate() const;

  std::size_t effective_steps() const;
  std::size_t effective_test_steps() const;
  int effective_calibration_episodes() const;
  std::vector<std::string> effective_variants() const;
  std::filesystem::path env_dir() const;
  std::filesystem::path data_dir() const { return env_dir() / "data"; }
  std::filesystem::path runs_dir() const { return env_dir() / "runs"; }
  std::filesystem::path results_path() const { return env_dir() / "results.csv"; }
};

/// Writes the config echo for `command` atomically under env_dir().
void write_config_echo(const ExperimentConfig& config, const std::string& command);

struct RunKey {
  rl::Algorithm algorithm;
  std::string variant;
  int seed_index;

  std::string name() const;
  std::string cell() const;
};

std::vector<RunKey> enumerate_runs(const ExperimentConfig& config);
std::uint64_t run_seed(const ExperimentConfig& config, int seed_index);
rl::AlgoConfig algo_config_for(const ExperimentConfig& config, const RunKey& key);

struct ExpertInfo {
  double epsilon = 0.0;
  double random_score = 0.0;
  double best_score = 0.0;
  bool in_band = false;
};

struct GenDataResult {
  std::vector<std::filesystem::path> files;
  experts::CalibrationResult calibration;
};

GenDataResult gen_data(const ExperimentConfig& config);
ExpertInfo load_expert_info(const ExperimentConfig& config);

struct TrainSummary {
  int completed = 0;
  int skipped = 0;
  std::vector<std::string> failures;
};

TrainSummary train_all(const ExperimentConfig& config);

struct EvalSummary {
  std::vector<eval::ResultRow> rows;
  std::vector<std::string> missing;
};

EvalSummary eval_all(const ExperimentConfig& config);

struct FqeSummary {
  int scored = 0;
  std::vector<std::string> failures;
  std::vector<eval::ResultRow> rows;
};

/// Glucose only; grid configurations return an empty summary.
FqeSummary fqe_all(const ExperimentConfig& config);

struct ReportSummary {
  std::vector<std::string> ordering_failures;
  std::vector<eval::CalibrationRow> calibration;
  double random_anchor = 0.0;
  double top_anchor = 0.0;
};

/// Writes the plain-text report to `os` plus report_returns.csv and
/// report_calibration.csv next to the results file.
ReportSummary report(const std::filesystem::path& results_path, std::ostream& os);

/// Anchors used for normalisation: the random policy's IQM in the irregular
/// environment, and the highest IQM over all rows.
std::pair<double, double> anchors(const std::vector<eval::ResultRow>& rows);

}  // namespace orl::pipeline
