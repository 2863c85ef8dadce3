#pragma once

#include <cstddef>
#include <span>

#include "rrm/reweight.hpp"

// Brute-force references for the inner reweighting problem. These solve the
// linear program generically and are only meant for tiny instances.
namespace rrm::verify {

inline constexpr std::size_t kOracleMaxSamples = 10;

struct LpSolution {
  WeightShift shift;
  double objective = 0.0;
};

/// Minimizes sum_i (1/N + u_i) c_i + (gamma/2) ||u||_1 subject to
/// sum_i u_i = 0 and u_i >= -1/N. Throws UnsupportedScale for N > 10.
LpSolution oracle_lp(std::span<const double> losses, double gamma);

/// Same objective with the sum-to-zero constraint dropped and an explicit
/// penalty coefficient: sum_i (1/N + u_i) c_i + penalty * ||u||_1 subject to
/// u_i >= -1/N only. Throws InvalidInput when some c_i + penalty < 0, since
/// the program is then unbounded.
double oracle_lp_relaxed(std::span<const double> losses, double penalty);

}  // namespace rrm::verify
