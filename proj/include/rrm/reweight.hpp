#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace rrm {

/// Absolute tolerance used to decide membership of the two breakpoint sets
/// (losses equal to the minimum, losses equal to minimum + gamma).
inline constexpr double kPartitionTol = 1e-9;

/// Absolute tolerance for the sum-to-zero and lower-bound invariants.
inline constexpr double kFeasibilityTol = 1e-12;

/// Per-sample shifts u of the empirical distribution: sample i carries
/// probability 1/N + u_i. Feasible shifts sum to zero and never push a
/// probability below zero.
class WeightShift {
 public:
  WeightShift() = default;

  /// The zero shift over n samples (plain empirical weights).
  explicit WeightShift(std::size_t n);

  /// Wraps raw shifts. Throws InvalidInput unless the vector is feasible
  /// within kFeasibilityTol.
  static WeightShift from_values(std::vector<double> shifts);

  std::size_t size() const noexcept { return shifts_.size(); }
  bool empty() const noexcept { return shifts_.empty(); }
  double operator[](std::size_t i) const { return shifts_[i]; }
  std::span<const double> values() const noexcept { return shifts_; }

  /// 1/N + u_i.
  double probability(std::size_t i) const;
  std::vector<double> probabilities() const;

  bool is_feasible(double tol = kFeasibilityTol) const;

 private:
  std::vector<double> shifts_;
};

/// Four-way split of sample indices by where each loss sits relative to
/// c_min and c_min + gamma. Indices are zero-based and ascending.
struct LossPartition {
  double c_min = 0.0;
  double gamma = 0.0;
  std::vector<std::size_t> i_min;  // c_i == c_min
  std::vector<std::size_t> i_mid;  // c_min < c_i < c_min + gamma
  std::vector<std::size_t> i_big;  // c_i == c_min + gamma
  std::vector<std::size_t> chi;    // c_i > c_min + gamma, pruned

  std::size_t size() const noexcept {
    return i_min.size() + i_mid.size() + i_big.size() + chi.size();
  }
};

struct ReweightConfig {
  double gamma = 0.4;
  double mu = 0.5;
  /// Estimated contamination fraction. When set, gamma is re-tuned at every
  /// re-weight step and mu is forced to 1.
  std::optional<double> contamination_estimate;

  void validate() const;
};

LossPartition partition_losses(std::span<const double> losses, double gamma);

/// Closed-form minimizer of sum_i (1/N + u_i) c_i + (gamma/2) ||u||_1 over
/// feasible shifts: the pruned set gets u_i = -1/N, its mass is spread evenly
/// over the minimum-loss samples, everything else is left untouched.
WeightShift solve_reweight(std::span<const double> losses, double gamma);

/// Builds the same solution from an existing partition of n losses.
WeightShift solve_reweight(const LossPartition& partition, std::size_t n);

/// mu * u_star + (1 - mu) * u_prev.
WeightShift blend_weights(const WeightShift& u_prev, const WeightShift& u_star, double mu);

/// Gamma that prunes at least a `contamination_estimate` fraction of the
/// samples. Falls back to gamma_floor(c_min) when the quantile collapses onto
/// the minimum loss.
double auto_tune_gamma(std::span<const double> losses, double contamination_estimate);

/// Smallest gamma handed out by auto_tune_gamma.
double gamma_floor(double c_min) noexcept;

double reweight_objective(std::span<const double> losses, const WeightShift& u, double gamma);

/// Result of checking the optimality conditions with multiplier
/// lambda = c_min + gamma/2.
struct KktCertificate {
  double lambda = 0.0;
  std::vector<std::size_t> violations;

  bool satisfied() const noexcept { return violations.empty(); }
  explicit operator bool() const noexcept { return satisfied(); }
};

KktCertificate check_kkt(std::span<const double> losses, const WeightShift& u, double gamma,
                         double tol = 1e-9);

/// Total variation distance between the empirical distribution and 1/N + u.
double tv_distance(const WeightShift& u);

}  // namespace rrm
