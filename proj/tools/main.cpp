#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "experiment_config.hpp"
#include "rrm/error.hpp"
#include "rrm/record_io.hpp"

namespace {

using namespace rrm::cli;

struct Overrides {
  std::vector<std::uint64_t> seeds;
  std::string mode;
  std::vector<double> epsilon_test;
  bool epsilon_test_given = false;
  int workers = 0;
  std::string run_name;
};

ExperimentConfig load_with_overrides(const std::string& path, const Overrides& o) {
  nlohmann::json doc = rrm::read_json(path);
  // Overrides are applied to the document so the echoed config shows them.
  if (!o.seeds.empty()) doc["seeds"] = o.seeds;
  if (!o.mode.empty()) doc["train"]["mode"] = o.mode;
  if (o.epsilon_test_given) doc["train"]["epsilon_test"] = o.epsilon_test;
  if (o.workers > 0) doc["workers"] = o.workers;
  if (!o.run_name.empty()) doc["run_name"] = o.run_name;
  return parse_config(doc);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Loss-reweighting trainer for label-contaminated data"};
  app.require_subcommand(1);
  app.set_version_flag("--version", rrm::version_string());

  std::string config_path;
  Overrides overrides;

  auto* inject = app.add_subcommand("inject", "Build the contaminated training pool and test set");
  inject->add_option("-c,--config", config_path, "Experiment config (JSON)")->required();
  std::uint64_t inject_seed = 0;
  auto* inject_seed_opt =
      inject->add_option("--seed", inject_seed, "Override contamination.seed");

  auto* train = app.add_subcommand("train", "Train one model per seed from the injected caches");
  train->add_option("-c,--config", config_path, "Experiment config (JSON)")->required();
  train->add_option("--seed", overrides.seeds, "Override the seed list (repeatable)");
  train->add_option("--mode", overrides.mode, "Override train.mode")
      ->check(CLI::IsMember({"erm", "rrm", "arrm"}));
  auto* eps_opt = train->add_option("--epsilon-test", overrides.epsilon_test,
                                    "FGSM strengths for the test-set sweep")
                      ->delimiter(',');
  train->add_option("--workers", overrides.workers, "Concurrent seeds")->check(CLI::PositiveNumber);
  train->add_option("--run-name", overrides.run_name, "Run directory name (default: mode)");

  auto* verify = app.add_subcommand("verify", "Run the oracle and gradient verification suites");
  VerifyOptions vopt;
  verify->add_option("--seed", vopt.seed, "Verification seed");
  std::string replay, report_path;
  verify->add_option("--replay", replay, "Re-check one serialized failing instance");
  verify->add_option("--report", report_path, "Write the report as JSON");
  verify->add_option("--failure-out", vopt.failure_path, "Where to serialize the first failure");

  auto* report = app.add_subcommand("report", "Compare runs and export weight evolution");
  ReportOptions ropt;
  report->add_option("run_dirs", ropt.run_dirs, "Run directories (each with aggregate.json)")
      ->required();
  report->add_option("-o,--out", ropt.out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitSchema;
  }

  try {
    if (*inject) {
      ExperimentConfig cfg = load_with_overrides(config_path, {});
      if (*inject_seed_opt) cfg.contamination.seed = inject_seed;
      cmd_inject(cfg, std::cout);
      return kExitOk;
    }
    if (*train) {
      overrides.epsilon_test_given = eps_opt->count() > 0;
      const ExperimentConfig cfg = load_with_overrides(config_path, overrides);
      return cmd_train(cfg, std::cout).exit_code();
    }
    if (*verify) {
      if (!replay.empty()) vopt.replay_path = replay;
      if (!report_path.empty()) vopt.report_path = report_path;
      return cmd_verify(vopt, std::cout);
    }
    if (*report) {
      cmd_report(ropt, std::cout);
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitOther;
}
