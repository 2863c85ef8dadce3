#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "rrm/trainer.hpp"

namespace rrm {
namespace {

Splits blob_splits(double separation, std::size_t per_class, double rate, std::uint64_t seed,
                   std::array<double, 3> fractions = {0.6, 0.2, 0.2}) {
  Dataset d = make_synthetic_blobs(3, per_class, 4, separation, seed);
  if (rate > 0) d = apply_contamination(d, inject_ncar(d.clean_labels, rate, 3, seed + 1), rate, seed + 1);
  return split(d, fractions, seed + 2);
}

TrainConfig small_config(TrainMode mode, std::size_t dim = 4) {
  TrainConfig c;
  c.mode = mode;
  c.architecture = Architecture::softmax_linear(dim, 3);
  c.epochs_per_iteration = 2;
  c.batch_size = 16;
  c.learning_rate = 0.1;
  c.max_iterations = 3;
  c.seed = 5;
  return c;
}

TEST(TrainConfig, ModeEpsilonRules) {
  TrainConfig c = small_config(TrainMode::kRrm);
  EXPECT_NO_THROW(c.validate());
  c.epsilon_train = 0.1;
  EXPECT_THROW(c.validate(), InvalidInput);
  c.mode = TrainMode::kArrm;
  EXPECT_NO_THROW(c.validate());
  c.epsilon_train = 0.0;
  EXPECT_THROW(c.validate(), InvalidInput);
  c.mode = TrainMode::kErm;
  EXPECT_NO_THROW(c.validate());
  c.epsilon_train = 0.25;
  EXPECT_NO_THROW(c.validate());
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), InvalidInput);
}

TEST(TrainMode, Names) {
  for (TrainMode m : {TrainMode::kErm, TrainMode::kRrm, TrainMode::kArrm}) {
    EXPECT_EQ(parse_train_mode(to_string(m)), m);
  }
  EXPECT_THROW(parse_train_mode("sgd"), InvalidInput);
}

TEST(Histogram, Buckets) {
  EXPECT_EQ(WeightHistogram::bucket_of(3.0), 0u);
  EXPECT_EQ(WeightHistogram::bucket_of(0.02), 0u);
  EXPECT_EQ(WeightHistogram::bucket_of(0.01), 1u);
  EXPECT_EQ(WeightHistogram::bucket_of(0.0), 1u);
  EXPECT_EQ(WeightHistogram::bucket_of(-0.01), 1u);
  EXPECT_EQ(WeightHistogram::bucket_of(-0.1), 2u);
  EXPECT_EQ(WeightHistogram::bucket_of(-0.25), 3u);
  EXPECT_EQ(WeightHistogram::bucket_of(-0.4), 3u);
  EXPECT_EQ(WeightHistogram::bucket_of(-0.5), 4u);
  EXPECT_EQ(WeightHistogram::bucket_of(-0.75), 5u);
  EXPECT_EQ(WeightHistogram::bucket_of(-1.0), 5u);
  EXPECT_EQ(WeightHistogram::labels().back(), "[-1.00,-0.75]");
}

TEST(Histogram, CountsSplitByPopulation) {
  // N = 4: shifts scaled by N are -1, -0.5, 0, +1.5.
  const WeightShift u = WeightShift::from_values({-0.25, -0.125, 0.0, 0.375});
  const std::vector<std::size_t> contaminated = {0, 2};
  const WeightHistogram h = weight_histogram(u, contaminated);
  EXPECT_EQ(h.contaminated[5], 1u);
  EXPECT_EQ(h.contaminated[1], 1u);
  EXPECT_EQ(h.clean[4], 1u);
  EXPECT_EQ(h.clean[0], 1u);
  std::size_t total = 0;
  for (std::size_t b = 0; b < WeightHistogram::kBuckets; ++b) total += h.contaminated[b] + h.clean[b];
  EXPECT_EQ(total, 4u);
  EXPECT_THROW(weight_histogram(u, std::vector<std::size_t>{4}), InvalidInput);
}

TEST(GradientStep, SeparableBlobsReachHighAccuracy) {
  const Dataset d = make_synthetic_blobs(3, 200, 4, 10.0, 3);
  TrainConfig c = small_config(TrainMode::kErm);
  c.epochs_per_iteration = 20;
  std::mt19937_64 rng(1);
  const ModelState m =
      gradient_step(init_params(c.architecture, 2), d, WeightShift(d.size()), c, rng);
  EXPECT_GE(accuracy(m, d.features, d.clean_labels), 0.99);
}

TEST(GradientStep, ZeroShiftMatchesErm) {
  const Dataset d = make_synthetic_blobs(3, 40, 4, 3.0, 4);
  TrainConfig erm = small_config(TrainMode::kErm);
  TrainConfig rrm = small_config(TrainMode::kRrm);
  std::mt19937_64 r1(9), r2(9);
  const ModelState init = init_params(erm.architecture, 1);
  const ModelState a = gradient_step(init, d, WeightShift(d.size()), erm, r1);
  const ModelState b = gradient_step(init, d, WeightShift(d.size()), rrm, r2);
  for (std::size_t p = 0; p < a.theta.size(); ++p) EXPECT_NEAR(a.theta[p], b.theta[p], 1e-12);
}

TEST(GradientStep, FullyPrunedSampleHasNoInfluence) {
  Dataset d = make_synthetic_blobs(3, 20, 4, 3.0, 5);
  const std::size_t n = d.size();
  // Prune sample 7 and hand its mass to sample 0.
  std::vector<double> shift(n, 0.0);
  shift[7] = -1.0 / static_cast<double>(n);
  shift[0] = 1.0 / static_cast<double>(n);
  const WeightShift u = WeightShift::from_values(shift);

  Dataset flipped = d;
  flipped.observed_labels[7] = (d.observed_labels[7] + 1) % 3;
  flipped.contaminated = {7};

  const TrainConfig c = small_config(TrainMode::kRrm);
  std::mt19937_64 r1(3), r2(3);
  const ModelState init = init_params(c.architecture, 8);
  const ModelState a = gradient_step(init, d, u, c, r1);
  const ModelState b = gradient_step(init, flipped, u, c, r2);
  EXPECT_EQ(a.theta, b.theta);
}

TEST(GradientStep, RejectsMismatchedShift) {
  const Dataset d = make_synthetic_blobs(3, 5, 4, 3.0, 5);
  const TrainConfig c = small_config(TrainMode::kRrm);
  std::mt19937_64 rng(0);
  EXPECT_THROW(gradient_step(init_params(c.architecture, 0), d, WeightShift(3), c, rng),
               InvalidInput);
}

TEST(ReweightStep, EqualLossesKeepBlendedPrevious) {
  // A zero model gives every sample the same loss, so u* = 0.
  Dataset d = make_synthetic_blobs(3, 10, 4, 3.0, 6);
  TrainConfig c = small_config(TrainMode::kRrm);
  ModelState zero = ModelState::from_parameters(
      c.architecture, std::vector<double>(c.architecture.parameter_count(), 0.0));
  const std::size_t n = d.size();
  std::vector<double> prev(n, 0.0);
  prev[0] = -1.0 / static_cast<double>(n);
  prev[1] = 1.0 / static_cast<double>(n);
  const ReweightOutcome out = reweight_step(zero, d, WeightShift::from_values(prev), c);
  EXPECT_TRUE(out.partition.chi.empty());
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_NEAR(out.weights[i], 0.5 * prev[i], 1e-15);
    EXPECT_EQ(out.target[i], 0.0);
  }
}

TEST(ReweightStep, BlendHalvesTarget) {
  Splits s = blob_splits(2.0, 30, 0.3, 7, {1.0, 0.0, 0.0});
  TrainConfig c = small_config(TrainMode::kRrm);
  c.reweight.gamma = 0.2;
  std::mt19937_64 rng(1);
  const ModelState m = gradient_step(init_params(c.architecture, 1), s.train,
                                     WeightShift(s.train.size()), c, rng);
  const ReweightOutcome out = reweight_step(m, s.train, WeightShift(s.train.size()), c);
  ASSERT_FALSE(out.partition.chi.empty());
  for (std::size_t i = 0; i < s.train.size(); ++i) {
    EXPECT_NEAR(out.weights[i], 0.5 * out.target[i], 1e-15);
  }
}

TEST(ReweightStep, AutoTunePrunesEstimatedFraction) {
  Splits s = blob_splits(2.0, 34, 0.2, 8, {1.0, 0.0, 0.0});
  ASSERT_EQ(s.train.size(), 102u);
  TrainConfig c = small_config(TrainMode::kRrm);
  c.reweight.contamination_estimate = 0.2;
  std::mt19937_64 rng(4);
  const ModelState m = gradient_step(init_params(c.architecture, 4), s.train,
                                     WeightShift(s.train.size()), c, rng);
  const ReweightOutcome out = reweight_step(m, s.train, WeightShift(s.train.size()), c);
  EXPECT_EQ(out.mu, 1.0);
  EXPECT_GE(out.partition.chi.size(), 20u);
  for (std::size_t i : out.partition.chi) {
    EXPECT_EQ(out.weights[i], -1.0 / static_cast<double>(s.train.size()));
  }
}

TEST(Run, ErmNeverShiftsWeights) {
  const Splits s = blob_splits(3.0, 40, 0.3, 9);
  const RunResult r = run(s, small_config(TrainMode::kErm));
  for (double v : r.weights.values()) EXPECT_EQ(v, 0.0);
  for (const auto& it : r.record.iterations) {
    EXPECT_EQ(it.tv_distance, 0.0);
    EXPECT_TRUE(std::isnan(it.gamma));
    EXPECT_TRUE(std::isnan(it.pruned_precision));
  }
}

TEST(Run, DeterministicInSeed) {
  const Splits s = blob_splits(3.0, 40, 0.3, 10);
  TrainConfig c = small_config(TrainMode::kRrm);
  c.epsilon_test = {0.0, 0.1};
  const RunResult a = run(s, c);
  const RunResult b = run(s, c);
  EXPECT_EQ(a.model.theta, b.model.theta);
  EXPECT_EQ(a.weights.values()[0], b.weights.values()[0]);
  ASSERT_EQ(a.record.iterations.size(), b.record.iterations.size());
  for (std::size_t i = 0; i < a.record.iterations.size(); ++i) {
    EXPECT_EQ(a.record.iterations[i].loss_mean, b.record.iterations[i].loss_mean);
  }
  c.seed = 6;
  EXPECT_NE(run(s, c).model.theta, a.model.theta);
}

TEST(Run, RecordsIterationsAndEpsilonSweep) {
  const Splits s = blob_splits(3.0, 40, 0.3, 11);
  TrainConfig c = small_config(TrainMode::kRrm);
  c.epsilon_test = {0.0, 0.5};
  const RunResult r = run(s, c);
  ASSERT_FALSE(r.record.iterations.empty());
  EXPECT_EQ(r.record.iterations.front().epochs_completed, 2);
  ASSERT_EQ(r.record.epsilon_test_accuracy.size(), 2u);
  EXPECT_EQ(r.record.epsilon_test_accuracy[0].second,
            accuracy(r.best_model, s.test.features, s.test.clean_labels));
  EXPECT_EQ(r.record.iterations.back().tv_distance, tv_distance(r.weights));
  for (const auto& it : r.record.iterations) {
    std::size_t total = 0;
    for (std::size_t b = 0; b < WeightHistogram::kBuckets; ++b) {
      total += it.histogram.contaminated[b] + it.histogram.clean[b];
    }
    EXPECT_EQ(total, s.train.size());
  }
}

TEST(Run, NoValidationReportsFinalModel) {
  const Splits s = blob_splits(3.0, 40, 0.0, 12, {0.8, 0.0, 0.2});
  TrainConfig c = small_config(TrainMode::kRrm);
  const RunResult r = run(s, c);
  EXPECT_FALSE(r.record.has_validation);
  EXPECT_FALSE(r.record.early_stopped);
  EXPECT_EQ(static_cast<int>(r.record.iterations.size()), c.max_iterations);
  EXPECT_EQ(r.record.reported_test_accuracy(), r.record.final_test_accuracy);
  EXPECT_EQ(r.best_model.theta, r.model.theta);
}

TEST(Run, EarlyStoppingHonoursPatience) {
  // A learning rate this small leaves validation accuracy flat after the first
  // iteration, so the run stops once patience is exhausted.
  const Splits s = blob_splits(10.0, 40, 0.0, 13);
  TrainConfig c = small_config(TrainMode::kRrm);
  c.learning_rate = 1e-12;
  c.max_iterations = 20;
  c.patience = 3;
  const RunResult r = run(s, c);
  EXPECT_TRUE(r.record.early_stopped);
  EXPECT_EQ(r.record.best_validation_iteration, 1);
  EXPECT_EQ(r.record.iterations.size(), 4u);
  EXPECT_EQ(r.record.reported_test_accuracy(), r.record.iterations.front().test_accuracy);
}

TEST(Run, NumericFailureCarriesPartialRecord) {
  Splits s = blob_splits(3.0, 20, 0.0, 14);
  s.train.features(3, 1) = std::numeric_limits<double>::infinity();
  TrainConfig c = small_config(TrainMode::kRrm);
  try {
    run(s, c);
    FAIL() << "expected a run failure";
  } catch (const RunFailure& e) {
    EXPECT_NE(std::string(e.what()).find("iteration 1"), std::string::npos);
    EXPECT_TRUE(e.partial().iterations.empty());
  }
}

TEST(Run, RejectsShapeMismatch) {
  const Splits s = blob_splits(3.0, 20, 0.0, 15);
  TrainConfig c = small_config(TrainMode::kRrm, 5);
  EXPECT_THROW(run(s, c), InvalidInput);
}

}  // namespace
}  // namespace rrm
