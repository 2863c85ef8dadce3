#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rrm/trainer.hpp"

namespace rrm::cli {

inline constexpr int kSchemaVersion = 1;

enum class SourceKind { kIdx, kBlobs };

struct IdxSource {
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;
};

struct BlobSource {
  int num_classes = 3;
  std::size_t samples_per_class = 1000;
  std::size_t test_samples_per_class = 1000;
  std::size_t input_dim = 20;
  double separation = 8.0;
  std::uint64_t seed = 1;
};

struct DataSpec {
  SourceKind kind = SourceKind::kBlobs;
  IdxSource idx;
  BlobSource blobs;
  std::vector<int> classes;  // empty keeps every class
};

enum class ContaminationMode { kNcar, kKernel };

struct ContaminationSpec {
  ContaminationMode mode = ContaminationMode::kNcar;
  double rate = 0.0;
  std::string kernel_path;  // empty selects the built-in 10-class table
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  DataSpec data;
  ContaminationSpec contamination;
  /// Train / validation shares of the contaminated training pool. The test
  /// set always comes from the clean test source.
  double train_fraction = 1.0;
  double validation_fraction = 0.0;
  std::uint64_t split_seed = 0;
  /// Hidden widths of the classifier; input and output widths follow the data.
  std::vector<std::size_t> hidden = {64, 64};
  TrainConfig train;
  std::vector<std::uint64_t> seeds = {0};
  int workers = 1;
  std::string output_dir = "runs";
  std::string run_name;  // defaults to the training mode

  /// Raw document as given, echoed into every artifact.
  nlohmann::json source;
};

/// Parses and validates a configuration document. Unknown keys, wrong types
/// and out-of-range values throw InvalidInput naming the offending key.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);

nlohmann::json to_json(const ExperimentConfig& config);

/// Output directory with RRM_OUTPUT_ROOT applied to relative paths.
std::string resolve_output_dir(const std::string& dir);

/// Directory holding the per-seed runs of this configuration.
std::string run_directory(const ExperimentConfig& config);

std::string_view to_string(ContaminationMode mode) noexcept;

}  // namespace rrm::cli
