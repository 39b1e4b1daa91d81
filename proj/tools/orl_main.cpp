// Command-line entry point: orl gen-data | train | eval | fqe | report
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "orl/errors.hpp"
#include "orl/kv.hpp"
#include "orl/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct CommonFlags {
  std::string config_file;
  std::optional<std::string> env;
  std::optional<std::size_t> steps;
  std::optional<std::uint64_t> seed;
  std::optional<int> seeds;
  std::optional<std::string> out;
  std::optional<int> workers;
  std::optional<int> replicates;
  std::optional<std::string> formulation;
  std::optional<std::string> algorithms;
  std::optional<std::string> variants;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_file, "key = value configuration file");
  cmd->add_option("--env", f.env, "grid or glucose");
  cmd->add_option("--n,--steps", f.steps, "atomic steps in the training log");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--seeds", f.seeds, "training seeds per cell");
  cmd->add_option("--out", f.out, "output directory (overrides ORL_OUT)");
  cmd->add_option("--workers", f.workers, "parallel runs");
  cmd->add_option("--replicates", f.replicates, "bootstrap replicates");
  cmd->add_option("--formulation", f.formulation, "force mdp or smdp (must match every variant)");
  cmd->add_option("--algorithms", f.algorithms, "comma list of bc, iql, cql");
  cmd->add_option("--variants", f.variants, "comma list of dataset variants");
  cmd->add_option("--set", f.overrides, "extra key=value setting, repeatable");
}

orl::pipeline::ExperimentConfig resolve(const CommonFlags& f) {
  orl::KeyValues kv;
  if (!f.config_file.empty()) kv = orl::KeyValues::load(f.config_file);
  if (const char* out = std::getenv("ORL_OUT"); out && *out) kv.set("out", std::string(out));
  for (const auto& item : f.overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw orl::ConfigError("--set expects key=value, got '" + item + "'");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv.set(trim(item.substr(0, eq)), trim(item.substr(eq + 1)));
  }
  if (f.env) kv.set("env", *f.env);
  if (f.steps) kv.set("steps", static_cast<std::uint64_t>(*f.steps));
  if (f.seed) kv.set("seed", *f.seed);
  if (f.seeds) kv.set("seeds", *f.seeds);
  if (f.out) kv.set("out", *f.out);
  if (f.workers) kv.set("workers", *f.workers);
  if (f.replicates) kv.set("replicates", *f.replicates);
  if (f.formulation) kv.set("formulation", *f.formulation);
  if (f.algorithms) kv.set("algorithms", *f.algorithms);
  if (f.variants) kv.set("variants", *f.variants);
  auto config = orl::pipeline::ExperimentConfig::from_key_values(kv);
  config.validate();
  return config;
}

int run(int argc, char** argv) {
  CLI::App app{"Offline RL under irregular decision timing"};
  app.require_subcommand(1);
  CommonFlags flags;
  std::string results_path;

  auto* gen = app.add_subcommand("gen-data", "calibrate the expert, collect the log, write dataset variants");
  auto* train = app.add_subcommand("train", "train every algorithm x variant x seed cell");
  auto* eval = app.add_subcommand("eval", "deploy checkpoints in regular and irregular modes, write results.csv");
  auto* fqe = app.add_subcommand("fqe", "fitted Q evaluation of glucose cells, merged into results.csv");
  auto* rep = app.add_subcommand("report", "summary tables from results.csv");
  for (auto* cmd : {gen, train, eval, fqe, rep}) add_common(cmd, flags);
  rep->add_option("--results", results_path, "results CSV (default: <out>/<env>/results.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  const auto config = resolve(flags);
  using namespace orl::pipeline;

  if (gen->parsed()) {
    write_config_echo(config, "gen-data");
    const auto r = gen_data(config);
    for (const auto& p : r.files) std::cout << p.string() << '\n';
    return kExitOk;
  }
  if (train->parsed()) {
    write_config_echo(config, "train");
    const auto s = train_all(config);
    std::cout << "completed " << s.completed << ", skipped " << s.skipped << ", failed " << s.failures.size() << '\n';
    for (const auto& f : s.failures) std::cout << "  failed: " << f << '\n';
    return s.failures.empty() ? kExitOk : kExitRuntime;
  }
  if (eval->parsed()) {
    write_config_echo(config, "eval");
    const auto s = eval_all(config);
    std::cout << "wrote " << config.results_path().string() << " (" << s.rows.size() << " rows)\n";
    if (!s.missing.empty()) {
      std::cout << "missing checkpoints:\n";
      for (const auto& m : s.missing) std::cout << "  " << m << '\n';
      return kExitRuntime;
    }
    return kExitOk;
  }
  if (fqe->parsed()) {
    write_config_echo(config, "fqe");
    const auto s = fqe_all(config);
    if (config.env != orl::env::EnvKind::Glucose) {
      std::cout << "fqe: grid cells skipped (glucose only)\n";
      return kExitOk;
    }
    std::cout << "scored " << s.scored << " runs, failed " << s.failures.size() << '\n';
    for (const auto& f : s.failures) std::cout << "  failed: " << f << '\n';
    return kExitOk;
  }
  const std::filesystem::path path = results_path.empty() ? config.results_path() : std::filesystem::path(results_path);
  report(path, std::cout);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const orl::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const orl::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const orl::FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
