#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include <gtest/gtest.h>

#include "orl/errors.hpp"
#include "orl/eval/results.hpp"
#include "orl/pipeline.hpp"
#include "test_support.hpp"

using namespace orl;
using namespace orl::pipeline;
using orl::testing::TempDir;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

KeyValues tiny_grid(const fs::path& out) {
  KeyValues kv;
  kv.set("env", "grid");
  kv.set("out", out.string());
  kv.set("steps", 1500);
  kv.set("seeds", 2);
  kv.set("calibration_episodes", 20);
  kv.set("calibration_iterations", 3);
  kv.set("eval_grid_episodes", 5);
  kv.set("replicates", 50);
  kv.set("train.update_steps", 40);
  kv.set("train.batch_size", 16);
  kv.set("train.hidden_dim", 8);
  kv.set("workers", 2);
  return kv;
}

KeyValues tiny_glucose(const fs::path& out) {
  KeyValues kv;
  kv.set("env", "glucose");
  kv.set("out", out.string());
  kv.set("steps", 700);
  kv.set("test_steps", 300);
  kv.set("seeds", 1);
  kv.set("algorithms", "bc,iql");
  kv.set("calibration_episodes", 1);
  kv.set("calibration_iterations", 2);
  kv.set("eval_glucose_episodes", 1);
  kv.set("validation_episodes", 1);
  kv.set("replicates", 50);
  kv.set("train.update_steps", 20);
  kv.set("train.eval_every", 10);
  kv.set("train.batch_size", 16);
  kv.set("train.hidden_dim", 8);
  kv.set("fqe.update_steps", 30);
  kv.set("fqe.batch_size", 16);
  kv.set("fqe.hidden_dim", 8);
  kv.set("workers", 2);
  return kv;
}

ExperimentConfig config_of(const KeyValues& kv) {
  auto c = ExperimentConfig::from_key_values(kv);
  c.validate();
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ORL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

eval::ResultRow row(const std::string& algo, const std::string& variant, const std::string& mode, double iqm) {
  eval::ResultRow r;
  r.cell_id = algo + "-" + variant;
  r.algorithm = algo;
  r.variant = variant;
  r.mode = mode;
  r.seeds = 2;
  r.iqm = iqm;
  r.ci_low = iqm - 0.1;
  r.ci_high = iqm + 0.1;
  return r;
}

}  // namespace

TEST(Config, UnknownKeysAndMismatchesRefused) {
  KeyValues kv;
  kv.set("nonsense", 1);
  EXPECT_THROW(ExperimentConfig::from_key_values(kv), ConfigError);

  KeyValues bad_train;
  bad_train.set("train.learning_rate", 0.1);
  EXPECT_THROW(config_of(bad_train), ConfigError);

  KeyValues mismatch;
  mismatch.set("env", "glucose");
  mismatch.set("variants", "unprocessed,binned-12");
  mismatch.set("formulation", "mdp");
  EXPECT_THROW(config_of(mismatch), ConfigError);
  mismatch.set("variants", "binned-12");
  EXPECT_NO_THROW(config_of(mismatch));

  KeyValues averaged_grid;
  averaged_grid.set("variants", "binned-2");
  EXPECT_THROW(config_of(averaged_grid), ConfigError);
}

TEST(Config, VariantNamesAndFormulations) {
  EXPECT_EQ(formulation_for(parse_variant("unprocessed")), rl::Formulation::Smdp);
  EXPECT_EQ(formulation_for(parse_variant("interpolated")), rl::Formulation::Mdp);
  const auto b = parse_variant("binned-24");
  EXPECT_EQ(b.width, 24);
  EXPECT_FALSE(b.subsample);
  EXPECT_TRUE(parse_variant("subsampled-2").subsample);
  EXPECT_THROW(parse_variant("binned-0"), ConfigError);
  EXPECT_THROW(parse_variant("smoothed"), ConfigError);
}

TEST(Config, KeyValueRoundTripAndOverrides) {
  TempDir dir("cfg");
  auto kv = tiny_grid(dir.path());
  kv.set("train.iql.expectile", 0.8);
  const auto c = config_of(kv);
  const auto back = ExperimentConfig::from_key_values(c.to_key_values());
  EXPECT_EQ(back.to_key_values().entries(), c.to_key_values().entries());
  const auto iql = algo_config_for(c, {rl::Algorithm::Iql, "unprocessed", 1});
  EXPECT_EQ(iql.expectile, 0.8);
  EXPECT_EQ(iql.update_steps, 40);
  EXPECT_EQ(iql.formulation, rl::Formulation::Smdp);
  EXPECT_NE(run_seed(c, 0), run_seed(c, 1));
  EXPECT_EQ(enumerate_runs(c).size(), 3u * 3u * 2u);
}

TEST(Results, CsvRoundTripAndValidation) {
  std::vector<eval::ResultRow> rows{row("iql", "unprocessed", "irregular", 0.5), row("random", "none", "irregular", 0.1)};
  rows[0].fqe = 0.7;
  rows[0].fqe_ci_low = 0.6;
  rows[0].fqe_ci_high = 0.8;
  std::stringstream ss;
  eval::write_results_csv(ss, rows);
  const auto back = eval::read_results_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].fqe, 0.7);
  EXPECT_FALSE(back[1].fqe.has_value());
  EXPECT_EQ(back[1].algorithm, "random");

  std::stringstream bad_ci;
  bad_ci << eval::kResultsHeader << "\nc,iql,binned-12,regular,2,0.5,0.6,0.9,0,,,\n";
  EXPECT_THROW(eval::read_results_csv(bad_ci), FormatError);
  std::stringstream extra_column;
  extra_column << eval::kResultsHeader << ",extra\n";
  EXPECT_THROW(eval::read_results_csv(extra_column), FormatError);
  std::stringstream short_row;
  short_row << eval::kResultsHeader << "\nc,iql,binned-12,regular,2\n";
  EXPECT_THROW(eval::read_results_csv(short_row), FormatError);
}

TEST(Report, OrderingAndOmittedCalibration) {
  TempDir dir("report");
  std::vector<eval::ResultRow> rows{row("iql", "binned-12", "irregular", 0.2), row("iql", "unprocessed", "irregular", 0.6),
                                    row("iql", "interpolated", "irregular", 0.4), row("cql", "unprocessed", "irregular", 0.1),
                                    row("cql", "binned-12", "irregular", 0.3), row("random", "none", "irregular", 0.0)};
  const auto path = dir.path() / "results.csv";
  eval::save_results_csv(path, rows);
  std::ostringstream os;
  const auto s = report(path, os);
  EXPECT_EQ(s.ordering_failures, std::vector<std::string>{"irregular/cql"});
  EXPECT_NE(os.str().find("Calibration table omitted"), std::string::npos);
  EXPECT_DOUBLE_EQ(s.top_anchor, 0.6);
  EXPECT_TRUE(fs::exists(dir.path() / "report_returns.csv"));

  // true side comes from the stored normalised column
  rows[1].normalised = 1.0;
  rows[1].fqe = 0.9;
  rows[1].fqe_ci_low = 0.8;
  rows[1].fqe_ci_high = 1.0;
  eval::save_results_csv(path, rows);
  std::ostringstream os2;
  const auto t = report(path, os2);
  ASSERT_EQ(t.calibration.size(), 1u);
  EXPECT_NEAR(t.calibration[0].gap, 0.5, 1e-12);
  EXPECT_TRUE(fs::exists(dir.path() / "report_calibration.csv"));
}

TEST(Pipeline, GridEndToEnd) {
  TempDir dir("grid");
  const auto c = config_of(tiny_grid(dir.path()));
  const auto g = gen_data(c);
  ASSERT_EQ(g.files.size(), 3u);
  std::vector<std::string> first;
  for (const auto& f : g.files) first.push_back(slurp(f));
  const auto again = gen_data(c);
  for (std::size_t i = 0; i < again.files.size(); ++i) EXPECT_EQ(slurp(again.files[i]), first[i]) << again.files[i];

  const auto t = train_all(c);
  EXPECT_EQ(t.completed, 18);
  EXPECT_TRUE(t.failures.empty());
  int checkpoints = 0;
  for (const auto& e : fs::directory_iterator(c.runs_dir())) checkpoints += fs::exists(e.path() / "agent.meta");
  EXPECT_EQ(checkpoints, 18);
  const auto resumed = train_all(c);
  EXPECT_EQ(resumed.completed, 0);
  EXPECT_EQ(resumed.skipped, 18);

  const auto e = eval_all(c);
  EXPECT_TRUE(e.missing.empty());
  // 9 cells × 2 modes + expert and random baselines in both modes
  EXPECT_EQ(e.rows.size(), 9u * 2u + 4u);
  bool expert_normalised = false;
  for (const auto& r : e.rows) {
    EXPECT_LE(r.ci_low, r.iqm);
    EXPECT_LE(r.iqm, r.ci_high);
    if (r.algorithm == "expert") expert_normalised = std::isfinite(r.normalised);
  }
  EXPECT_TRUE(expert_normalised);
  EXPECT_EQ(eval::load_results_csv(c.results_path()).size(), e.rows.size());

  const auto f = fqe_all(c);
  EXPECT_EQ(f.scored, 0);
  EXPECT_TRUE(f.rows.empty());

  fs::remove_all(c.runs_dir() / "cql-interpolated-s1");
  const auto partial = eval_all(c);
  EXPECT_EQ(partial.missing, std::vector<std::string>{"cql-interpolated-s1"});
}

TEST(Pipeline, GlucoseEndToEnd) {
  TempDir dir("glucose");
  const auto c = config_of(tiny_glucose(dir.path()));
  const auto g = gen_data(c);
  EXPECT_EQ(g.files.size(), 4u);
  const auto t = train_all(c);
  EXPECT_EQ(t.completed, 8);
  const auto e = eval_all(c);
  EXPECT_EQ(e.rows.size(), 8u * 2u + 4u);
  const auto f = fqe_all(c);
  EXPECT_EQ(f.scored + static_cast<int>(f.failures.size()), 8);
  const auto merged = eval::load_results_csv(c.results_path());
  int with_fqe = 0;
  for (const auto& r : merged) with_fqe += r.fqe.has_value();
  EXPECT_GT(with_fqe, 0);
  const auto before = slurp(c.results_path());
  fqe_all(c);
  EXPECT_EQ(slurp(c.results_path()), before);
  std::ostringstream os;
  const auto rep = report(c.results_path(), os);
  EXPECT_FALSE(rep.calibration.empty());
}

TEST(Cli, ExitCodes) {
  TempDir dir("cli");
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("frobnicate"), 1);
  EXPECT_EQ(run_cli("train --env grid --set bogus=1 --out " + dir.path().string()), 1);
  EXPECT_EQ(run_cli("train --env glucose --variants unprocessed --formulation mdp --out " + dir.path().string()), 1);
  // no datasets yet
  EXPECT_EQ(run_cli("train --env grid --out " + dir.path().string()), 1);
  const auto results = dir.path() / "broken.csv";
  std::ofstream(results) << "not,a,results,file\n";
  EXPECT_EQ(run_cli("report --results " + results.string()), 1);
  std::ofstream(dir.path() / "dir_file") << "x";
  EXPECT_EQ(run_cli("eval --env grid --out " + (dir.path() / "dir_file").string()), 2);
}
