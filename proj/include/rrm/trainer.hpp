#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "rrm/data.hpp"
#include "rrm/error.hpp"
#include "rrm/model.hpp"
#include "rrm/reweight.hpp"

namespace rrm {

/// kErm trains on the plain empirical loss (with FGSM batches when
/// epsilon_train > 0, i.e. adversarial training). kRrm and kArrm alternate
/// gradient epochs with re-weighting; kArrm perturbs every batch with FGSM.
enum class TrainMode { kErm, kRrm, kArrm };

std::string_view to_string(TrainMode mode) noexcept;
TrainMode parse_train_mode(std::string_view name);

struct TrainConfig {
  TrainMode mode = TrainMode::kRrm;
  LossKind loss = LossKind::kCce;
  Architecture architecture;
  double epsilon_train = 0.0;
  int epochs_per_iteration = 10;
  int batch_size = 32;
  double learning_rate = 0.1;
  ReweightConfig reweight;
  int max_iterations = 10;
  /// Stop after this many iterations without a new best validation accuracy.
  int patience = 10;
  std::uint64_t seed = 0;
  /// FGSM strengths applied to the test set when the run is reported.
  std::vector<double> epsilon_test;

  void validate() const;
};

/// Bucketing of u_i * N: >>0, ~0, then quarters of the nominal
/// weight down to the fully pruned -1.
struct WeightHistogram {
  static constexpr std::size_t kBuckets = 6;
  /// |u_i| * N at or below this counts as ~0.
  static constexpr double kZeroBand = 0.01;

  std::array<std::size_t, kBuckets> contaminated{};
  std::array<std::size_t, kBuckets> clean{};

  static std::array<std::string_view, kBuckets> labels();
  static std::size_t bucket_of(double scaled_shift);

  std::size_t bottom_contaminated() const { return contaminated.back(); }
  std::size_t bottom_clean() const { return clean.back(); }
};

WeightHistogram weight_histogram(const WeightShift& u, std::span<const std::size_t> contaminated);

struct IterationRecord {
  int iteration = 0;
  int epochs_completed = 0;
  double loss_mean = 0.0;
  double loss_min = 0.0;
  double loss_max = 0.0;
  double train_accuracy = 0.0;        // against observed labels
  double train_clean_accuracy = 0.0;  // against clean labels
  double validation_accuracy = 0.0;   // NaN without a validation split
  double test_accuracy = 0.0;         // NaN without a test split
  double gamma = 0.0;
  double mu = 0.0;
  double tv_distance = 0.0;
  std::size_t pruned = 0;
  double pruned_precision = 0.0;  // |chi & C| / |chi|, NaN when nothing is pruned
  double pruned_recall = 0.0;     // |chi & C| / |C|, NaN when C is empty
  WeightHistogram histogram;
};

struct RunRecord {
  std::vector<IterationRecord> iterations;
  int best_validation_iteration = 0;
  double test_at_peak_validation = 0.0;
  double max_test_accuracy = 0.0;
  double final_test_accuracy = 0.0;
  bool early_stopped = false;
  /// (epsilon_test, accuracy) measured on the peak-validation model.
  std::vector<std::pair<double, double>> epsilon_test_accuracy;

  /// test_at_peak_validation when the run had a validation split, otherwise
  /// the final test accuracy.
  double reported_test_accuracy() const;
  bool has_validation = false;
};

struct RunResult {
  ModelState model;       // after the last iteration
  ModelState best_model;  // at peak validation accuracy
  WeightShift weights;    // final u
  RunRecord record;
};

/// Raised by run() when training fails; carries the iterations completed so far.
class RunFailure : public NumericFailure {
 public:
  RunFailure(const std::string& what, RunRecord partial)
      : NumericFailure(what), partial_(std::move(partial)) {}
  const RunRecord& partial() const noexcept { return partial_; }

 private:
  RunRecord partial_;
};

/// sigma epochs of shuffled mini-batch SGD. Sample i enters the update with
/// weight 1/N + u_i; the step is scaled by N / batch so that u = 0 reproduces
/// the usual mean-over-batch update with learning rate eta. kErm uses that
/// mean update directly and ignores u.
ModelState gradient_step(ModelState model, const Dataset& train, const WeightShift& u,
                         const TrainConfig& config, std::mt19937_64& rng);

struct ReweightOutcome {
  WeightShift weights;  // blended result handed to the next gradient step
  WeightShift target;   // closed-form minimizer before blending
  LossPartition partition;
  std::vector<double> losses;
  double gamma = 0.0;
  double mu = 0.0;
};

/// Evaluates the current model on every training sample (no perturbation),
/// solves the inner problem and blends with the previous shift.
ReweightOutcome reweight_step(const ModelState& model, const Dataset& train,
                              const WeightShift& u_prev, const TrainConfig& config);

/// Full training loop. Splits without validation rows disable early stopping.
RunResult run(const Splits& data, const TrainConfig& config);

double accuracy(const ModelState& model, const Matrix& features, std::span<const int> labels);

}  // namespace rrm
