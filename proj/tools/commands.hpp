#pragma once

#include <cstdint>
#include <exception>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "experiment_config.hpp"
#include "rrm/trainer.hpp"

namespace rrm::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitOther = 1,
  kExitSchema = 2,
  kExitIo = 3,
  kExitNumeric = 4,
  kExitVerification = 5,
};

/// Maps a library exception onto the documented exit codes.
int exit_code_for(const std::exception& e) noexcept;

/// Where cmd_inject leaves its datasets for a given configuration.
std::string train_cache_path(const ExperimentConfig& config);
std::string test_cache_path(const ExperimentConfig& config);

struct InjectResult {
  std::size_t samples = 0;
  std::size_t contaminated = 0;
  double rate = 0.0;
  std::uint64_t seed = 0;
};

InjectResult cmd_inject(const ExperimentConfig& config, std::ostream& log);

struct SeedOutcome {
  std::uint64_t seed = 0;
  int exit_code = kExitOk;
  std::string error;
  RunRecord record;
};

struct TrainResult {
  std::string run_dir;
  std::vector<SeedOutcome> seeds;
  nlohmann::json aggregate;

  /// 0 when every seed succeeded, otherwise the code of the first failure.
  int exit_code() const;
};

TrainResult cmd_train(const ExperimentConfig& config, std::ostream& log);

struct VerifyOptions {
  std::uint64_t seed = 20240611;
  std::optional<std::string> replay_path;
  std::optional<std::string> report_path;
  std::string failure_path = "verify_failure.json";
};

int cmd_verify(const VerifyOptions& options, std::ostream& log);

struct ReportOptions {
  std::vector<std::string> run_dirs;
  std::string out_dir = "report";
};

void cmd_report(const ReportOptions& options, std::ostream& log);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};

MeanStd mean_std(const std::vector<double>& values);

}  // namespace rrm::cli
