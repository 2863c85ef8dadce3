#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "rrm/error.hpp"
#include "rrm/oracle.hpp"
#include "rrm/reweight.hpp"

namespace rrm::verify {
namespace {

TEST(OracleLp, FourPointExample) {
  const std::vector<double> c = {1, 2, 5, 9};
  const LpSolution s = oracle_lp(c, 3.0);
  EXPECT_NEAR(s.objective, 2.75, 1e-12);
  EXPECT_TRUE(s.shift.is_feasible());
  EXPECT_NEAR(reweight_objective(c, s.shift, 3.0), 2.75, 1e-12);
}

TEST(OracleLp, TwoPointByHand) {
  // Moving the full 1/2 from the loss-3 point to the loss-0 point costs
  // (1/2)(0.5 + 0.5) = 0.5 in penalty and removes 1.5 of expected loss.
  const std::vector<double> c = {0, 3};
  EXPECT_NEAR(oracle_lp(c, 1.0).objective, 0.5, 1e-12);
  // With gamma = 10 the penalty outweighs the gain.
  EXPECT_NEAR(oracle_lp(c, 10.0).objective, 1.5, 1e-12);
}

TEST(OracleLp, TiesShareThePrunedMass) {
  const std::vector<double> c = {0, 0, 10};
  const LpSolution s = oracle_lp(c, 1.0);
  EXPECT_NEAR(s.objective, reweight_objective(c, solve_reweight(c, 1.0), 1.0), 1e-12);
  EXPECT_NEAR(s.shift[2], -1.0 / 3.0, 1e-12);
}

TEST(OracleLp, ConstantLossesNeedNoShift) {
  const std::vector<double> c = {4, 4, 4, 4, 4};
  const LpSolution s = oracle_lp(c, 0.7);
  EXPECT_NEAR(s.objective, 4.0, 1e-12);
  for (double v : s.shift.values()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(OracleLp, AgreesWithClosedFormOnRandomInstances) {
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> loss(0.0, 10.0);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 2 + rng() % 5;
    std::vector<double> c(n);
    for (double& v : c) v = loss(rng);
    for (double gamma : {0.1, 1.0, 10.0}) {
      const double lp = oracle_lp(c, gamma).objective;
      const double closed = reweight_objective(c, solve_reweight(c, gamma), gamma);
      EXPECT_NEAR(lp, closed, 1e-9);
    }
  }
}

TEST(OracleLp, FeasiblePointsNeverBeatTheOptimum) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> loss(0.0, 5.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> c(4);
    for (double& v : c) v = loss(rng);
    const double best = oracle_lp(c, 1.0).objective;
    for (int k = 0; k < 50; ++k) {
      // Random feasible shift: move a random fraction of one sample's mass.
      std::vector<double> u(4, 0.0);
      const std::size_t from = rng() % 4;
      const std::size_t to = (from + 1 + rng() % 3) % 4;
      const double m = std::uniform_real_distribution<double>(0.0, 0.25)(rng);
      u[from] -= m;
      u[to] += m;
      EXPECT_LE(best, reweight_objective(c, WeightShift::from_values(u), 1.0) + 1e-12);
    }
  }
}

TEST(OracleLp, RejectsLargeProblems) {
  EXPECT_THROW(oracle_lp(std::vector<double>(11, 1.0), 1.0), UnsupportedScale);
  EXPECT_THROW(oracle_lp_relaxed(std::vector<double>(11, 1.0), 1.0), UnsupportedScale);
}

TEST(OracleLpRelaxed, NeverAboveConstrained) {
  const std::vector<double> c = {1, 2, 5, 9};
  EXPECT_LE(oracle_lp_relaxed(c, 1.5), oracle_lp(c, 3.0).objective + 1e-12);

  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> loss(0.0, 10.0);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng() % 5;
    std::vector<double> c2(n);
    for (double& v : c2) v = loss(rng);
    for (double gamma : {0.1, 1.0, 10.0}) {
      EXPECT_LE(oracle_lp_relaxed(c2, gamma / 2), oracle_lp(c2, gamma).objective + 1e-9);
    }
  }
}

TEST(OracleLpRelaxed, ConstantLossesBelowPenaltyMatch) {
  const std::vector<double> c = {2, 2, 2};
  EXPECT_NEAR(oracle_lp_relaxed(c, 2.5), 2.0, 1e-12);
  EXPECT_NEAR(oracle_lp(c, 5.0).objective, 2.0, 1e-12);
}

TEST(OracleLpRelaxed, DroppingMassIsAllowed) {
  // Without the sum constraint a high-loss point can simply lose its weight.
  const std::vector<double> c = {0, 10};
  EXPECT_NEAR(oracle_lp_relaxed(c, 1.0), 0.5, 1e-12);
}

TEST(OracleLpRelaxed, RejectsUnboundedPrograms) {
  EXPECT_THROW(oracle_lp_relaxed(std::vector<double>{-3.0, 1.0}, 1.0), InvalidInput);
}

}  // namespace
}  // namespace rrm::verify
