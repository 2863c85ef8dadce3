#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "rrm/error.hpp"
#include "rrm/reweight.hpp"

namespace rrm {
namespace {

using Indices = std::vector<std::size_t>;

std::vector<double> random_losses(std::mt19937_64& rng, std::size_t n, double scale = 10.0) {
  std::uniform_real_distribution<double> draw(0.0, scale);
  std::vector<double> c(n);
  for (double& v : c) v = draw(rng);
  return c;
}

WeightShift random_feasible(std::mt19937_64& rng, std::size_t n) {
  // Convex combination of closed-form solutions is feasible by construction.
  std::uniform_real_distribution<double> g(0.05, 5.0);
  std::uniform_real_distribution<double> m(0.01, 1.0);
  WeightShift u(n);
  for (int k = 0; k < 3; ++k) {
    u = blend_weights(u, solve_reweight(random_losses(rng, n), g(rng)), m(rng));
  }
  return u;
}

TEST(PartitionLosses, SplitsAroundBreakpoints) {
  const std::vector<double> c = {1, 2, 5, 9};
  const LossPartition p = partition_losses(c, 3.0);
  EXPECT_DOUBLE_EQ(p.c_min, 1.0);
  EXPECT_EQ(p.i_min, Indices{0});
  EXPECT_EQ(p.i_mid, Indices{1});
  EXPECT_TRUE(p.i_big.empty());
  EXPECT_EQ(p.chi, (Indices{2, 3}));
}

TEST(PartitionLosses, ConstantLossesAreAllMinimal) {
  const std::vector<double> c = {7, 7, 7};
  const LossPartition p = partition_losses(c, 0.5);
  EXPECT_EQ(p.i_min, (Indices{0, 1, 2}));
  EXPECT_TRUE(p.i_mid.empty());
  EXPECT_TRUE(p.i_big.empty());
  EXPECT_TRUE(p.chi.empty());
}

TEST(PartitionLosses, UpperBreakpointLandsInBig) {
  const std::vector<double> c = {0, 2};
  const LossPartition p = partition_losses(c, 2.0);
  EXPECT_EQ(p.i_min, Indices{0});
  EXPECT_EQ(p.i_big, Indices{1});
  EXPECT_TRUE(p.chi.empty());
}

TEST(PartitionLosses, ToleranceFoldsNearTiesIntoBreakpointSets) {
  const std::vector<double> c = {1.0, 1.0 + 5e-10, 3.0 - 5e-10, 3.0 + 5e-10, 3.0 + 1e-8};
  const LossPartition p = partition_losses(c, 2.0);
  EXPECT_EQ(p.i_min, (Indices{0, 1}));
  EXPECT_EQ(p.i_big, (Indices{2, 3}));
  EXPECT_EQ(p.chi, Indices{4});
}

TEST(PartitionLosses, RejectsBadInput) {
  EXPECT_THROW(partition_losses(std::vector<double>{}, 1.0), InvalidInput);
  EXPECT_THROW(partition_losses(std::vector<double>{1.0, NAN}, 1.0), InvalidInput);
  EXPECT_THROW(partition_losses(std::vector<double>{1.0, INFINITY}, 1.0), InvalidInput);
  EXPECT_THROW(partition_losses(std::vector<double>{1.0}, 0.0), InvalidInput);
  EXPECT_THROW(partition_losses(std::vector<double>{1.0}, -1.0), InvalidInput);
}

TEST(PartitionLosses, ScaleEquivariant) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 200; ++t) {
    const auto c = random_losses(rng, 12);
    const double gamma = std::uniform_real_distribution<double>(0.1, 5.0)(rng);
    const double alpha = std::uniform_real_distribution<double>(0.5, 3.0)(rng);
    const double beta = std::uniform_real_distribution<double>(-5.0, 5.0)(rng);
    std::vector<double> scaled(c.size());
    std::transform(c.begin(), c.end(), scaled.begin(),
                   [&](double v) { return alpha * v + beta; });
    const auto a = partition_losses(c, gamma);
    const auto b = partition_losses(scaled, alpha * gamma);
    EXPECT_EQ(a.i_min, b.i_min);
    EXPECT_EQ(a.i_mid, b.i_mid);
    EXPECT_EQ(a.i_big, b.i_big);
    EXPECT_EQ(a.chi, b.chi);
  }
}

TEST(SolveReweight, MovesPrunedMassToMinimum) {
  const std::vector<double> c = {1, 2, 5, 9};
  const WeightShift u = solve_reweight(c, 3.0);
  EXPECT_DOUBLE_EQ(u[0], 0.5);
  EXPECT_EQ(u[1], 0.0);
  EXPECT_EQ(u[2], -0.25);
  EXPECT_EQ(u[3], -0.25);
  EXPECT_NEAR(reweight_objective(c, u, 3.0), 2.75, 1e-12);
}

TEST(SolveReweight, NoReweightingForConstantLosses) {
  const std::vector<double> c = {7, 7, 7};
  for (double gamma : {0.01, 1.0, 100.0}) {
    const WeightShift u = solve_reweight(c, gamma);
    for (double v : u.values()) EXPECT_EQ(v, 0.0);
    EXPECT_DOUBLE_EQ(reweight_objective(c, u, gamma), 7.0);
  }
}

TEST(SolveReweight, SplitsPrunedMassEvenlyOverTies) {
  const std::vector<double> c = {0, 0, 10};
  const WeightShift u = solve_reweight(c, 1.0);
  EXPECT_NEAR(u[0], 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(u[1], 1.0 / 6.0, 1e-15);
  EXPECT_EQ(u[2], -1.0 / 3.0);
  const auto p = u.probabilities();
  EXPECT_NEAR(p[0], 0.5, 1e-15);
  EXPECT_NEAR(p[1], 0.5, 1e-15);
  EXPECT_EQ(p[2], 0.0);
}

TEST(SolveReweight, NoOpWhenSpreadBelowGamma) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    const auto c = random_losses(rng, 20, 1.0);
    const double spread = *std::max_element(c.begin(), c.end()) -
                          *std::min_element(c.begin(), c.end());
    const WeightShift u = solve_reweight(c, spread + 0.01);
    for (double v : u.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(SolveReweight, PruningIsExactAndFeasible) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 2 + rng() % 60;
    const auto c = random_losses(rng, n);
    const double gamma = std::uniform_real_distribution<double>(0.05, 8.0)(rng);
    const WeightShift u = solve_reweight(c, gamma);
    const LossPartition p = partition_losses(c, gamma);
    ASSERT_TRUE(u.is_feasible());
    for (std::size_t i : p.chi) EXPECT_EQ(u[i], -1.0 / static_cast<double>(n));
    for (std::size_t i : p.i_mid) EXPECT_EQ(u[i], 0.0);
    for (std::size_t i : p.i_big) EXPECT_EQ(u[i], 0.0);
    EXPECT_NEAR(tv_distance(u), static_cast<double>(p.chi.size()) / n, 1e-12);
    EXPECT_TRUE(check_kkt(c, u, gamma).satisfied());
  }
}

TEST(SolveReweight, PropagatesPartitionErrors) {
  EXPECT_THROW(solve_reweight(std::vector<double>{}, 1.0), InvalidInput);
  EXPECT_THROW(solve_reweight(std::vector<double>{1.0, 2.0}, 0.0), InvalidInput);
}

TEST(WeightShiftType, FromValuesValidates) {
  EXPECT_NO_THROW(WeightShift::from_values({0.25, -0.25, 0.0}));
  EXPECT_THROW(WeightShift::from_values({0.1, 0.0}), InvalidInput);     // sum != 0
  EXPECT_THROW(WeightShift::from_values({0.6, -0.6}), InvalidInput);    // below -1/N
  EXPECT_THROW(WeightShift::from_values({NAN, 0.0}), InvalidInput);
  const WeightShift z(4);
  EXPECT_EQ(z.size(), 4u);
  EXPECT_DOUBLE_EQ(z.probability(2), 0.25);
}

TEST(BlendWeights, IdentityAtFullStep) {
  std::mt19937_64 rng(8);
  const WeightShift a = random_feasible(rng, 9);
  const WeightShift b = random_feasible(rng, 9);
  const WeightShift r = blend_weights(a, b, 1.0);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(r[i], b[i]);
}

TEST(BlendWeights, HalfStepFromZero) {
  const WeightShift star = WeightShift::from_values({0.5, 0.0, -0.25, -0.25});
  const WeightShift r = blend_weights(WeightShift(4), star, 0.5);
  EXPECT_EQ(r[0], 0.25);
  EXPECT_EQ(r[1], 0.0);
  EXPECT_EQ(r[2], -0.125);
  EXPECT_EQ(r[3], -0.125);
}

TEST(BlendWeights, StaysFeasible) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 1 + rng() % 40;
    const WeightShift a = random_feasible(rng, n);
    const WeightShift b = random_feasible(rng, n);
    const double mu = std::uniform_real_distribution<double>(1e-6, 1.0)(rng);
    const WeightShift r = blend_weights(a, b, mu);
    double sum = 0.0;
    for (double v : r.values()) {
      EXPECT_GE(v, -1.0 / n - 1e-12);
      sum += v;
    }
    EXPECT_NEAR(sum, 0.0, 1e-12);
  }
}

TEST(BlendWeights, RejectsMismatchAndBadStep) {
  EXPECT_THROW(blend_weights(WeightShift(3), WeightShift(4), 0.5), InvalidInput);
  EXPECT_THROW(blend_weights(WeightShift(3), WeightShift(3), 0.0), InvalidInput);
  EXPECT_THROW(blend_weights(WeightShift(3), WeightShift(3), 1.5), InvalidInput);
}

TEST(AutoTuneGamma, QuarterOfEightLosses) {
  const std::vector<double> c = {1, 2, 3, 4, 5, 6, 7, 8};
  const double gamma = auto_tune_gamma(c, 0.25);
  EXPECT_DOUBLE_EQ(gamma, 5.0);
  EXPECT_EQ(partition_losses(c, gamma).chi, (Indices{6, 7}));
}

TEST(AutoTuneGamma, ZeroEstimateSpansTheRange) {
  const std::vector<double> c = {3, 1, 4, 1.5, 9};
  const double gamma = auto_tune_gamma(c, 0.0);
  EXPECT_DOUBLE_EQ(gamma, 8.0);
  EXPECT_TRUE(partition_losses(c, gamma).chi.empty());
}

TEST(AutoTuneGamma, DegenerateQuantileFallsBackToFloor) {
  const std::vector<double> c = {5, 5, 5, 5};
  const double gamma = auto_tune_gamma(c, 0.5);
  EXPECT_EQ(gamma, gamma_floor(5.0));
  EXPECT_GT(gamma, 0.0);
  EXPECT_TRUE(partition_losses(c, gamma).chi.empty());
}

TEST(AutoTuneGamma, TiesAtTheQuantileStillReachTheTarget) {
  const std::vector<double> c = {0, 1, 1, 1, 2, 2};
  // Two samples lie above 1 (1/3 < 0.5), so the level drops to the minimum
  // and only the floor remains; that still prunes everything above 0.
  const double gamma = auto_tune_gamma(c, 0.5);
  EXPECT_EQ(gamma, gamma_floor(0.0));
  EXPECT_EQ(partition_losses(c, gamma).chi.size(), 5u);
}

TEST(AutoTuneGamma, PrunesAtLeastTheEstimate) {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 5 + rng() % 200;
    const auto c = random_losses(rng, n);
    const double est = std::uniform_real_distribution<double>(0.0, 0.9)(rng);
    const double gamma = auto_tune_gamma(c, est);
    ASSERT_GT(gamma, 0.0);
    const auto chi = partition_losses(c, gamma).chi.size();
    EXPECT_GE(static_cast<double>(chi) / n, est) << "n=" << n << " est=" << est;
  }
}

TEST(AutoTuneGamma, RejectsBadEstimate) {
  const std::vector<double> c = {1, 2};
  EXPECT_THROW(auto_tune_gamma(c, -0.1), InvalidInput);
  EXPECT_THROW(auto_tune_gamma(c, 1.1), InvalidInput);
  EXPECT_THROW(auto_tune_gamma(std::vector<double>{}, 0.1), InvalidInput);
}

TEST(ReweightObjective, ZeroShiftGivesMean) {
  const std::vector<double> c = {1, 2, 3, 10};
  EXPECT_DOUBLE_EQ(reweight_objective(c, WeightShift(4), 2.0), 4.0);
  EXPECT_THROW(reweight_objective(c, WeightShift(3), 2.0), InvalidInput);
}

TEST(ReweightObjective, ClosedFormBeatsRandomFeasiblePoints) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng() % 10;
    const auto c = random_losses(rng, n);
    const double gamma = std::uniform_real_distribution<double>(0.1, 5.0)(rng);
    const double best = reweight_objective(c, solve_reweight(c, gamma), gamma);
    for (int k = 0; k < 20; ++k) {
      EXPECT_LE(best, reweight_objective(c, random_feasible(rng, n), gamma) + 1e-12);
    }
  }
}

TEST(CheckKkt, AcceptsClosedFormSolution) {
  const std::vector<double> c = {1, 2, 5, 9};
  const KktCertificate cert = check_kkt(c, solve_reweight(c, 3.0), 3.0);
  EXPECT_TRUE(cert.satisfied());
  EXPECT_DOUBLE_EQ(cert.lambda, 2.5);
}

TEST(CheckKkt, AcceptsZeroShiftInsideBand) {
  const std::vector<double> c = {1, 2};
  EXPECT_TRUE(check_kkt(c, WeightShift(2), 5.0));
}

TEST(CheckKkt, RejectsMassMovedUphill) {
  const std::vector<double> c = {1, 9};
  const KktCertificate cert = check_kkt(c, WeightShift::from_values({-0.5, 0.5}), 3.0);
  EXPECT_FALSE(cert.satisfied());
  EXPECT_NE(std::find(cert.violations.begin(), cert.violations.end(), 1u),
            cert.violations.end());
}

TEST(CheckKkt, RejectsUnprunedOutlier) {
  const std::vector<double> c = {1, 2, 5, 9};
  EXPECT_FALSE(check_kkt(c, WeightShift(4), 3.0));
}

TEST(TvDistance, MatchesPrunedFraction) {
  EXPECT_EQ(tv_distance(WeightShift(5)), 0.0);
  const std::vector<double> c = {1, 2, 5, 9};
  EXPECT_DOUBLE_EQ(tv_distance(solve_reweight(c, 3.0)), 0.5);
}

TEST(ReweightConfigValidation, Ranges) {
  ReweightConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.mu = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidInput);
  cfg.mu = 1.0;
  cfg.gamma = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidInput);
  cfg.gamma = 1.0;
  cfg.contamination_estimate = 1.2;
  EXPECT_THROW(cfg.validate(), InvalidInput);
}

}  // namespace
}  // namespace rrm
