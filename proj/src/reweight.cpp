#include "rrm/reweight.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "rrm/error.hpp"

namespace rrm {

namespace {

void require_losses(std::span<const double> losses) {
  if (losses.empty()) throw InvalidInput("loss vector is empty");
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (!std::isfinite(losses[i])) {
      throw InvalidInput("loss " + std::to_string(i) + " is not finite");
    }
  }
}

void require_gamma(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw InvalidInput("gamma must be positive and finite, got " + std::to_string(gamma));
  }
}

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw InvalidInput(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                       std::to_string(b) + ")");
  }
}

}  // namespace

WeightShift::WeightShift(std::size_t n) : shifts_(n, 0.0) {}

WeightShift WeightShift::from_values(std::vector<double> shifts) {
  WeightShift u;
  u.shifts_ = std::move(shifts);
  if (!u.is_feasible()) throw InvalidInput("weight shift is not feasible (sum != 0 or u_i < -1/N)");
  return u;
}

double WeightShift::probability(std::size_t i) const {
  return 1.0 / static_cast<double>(shifts_.size()) + shifts_[i];
}

std::vector<double> WeightShift::probabilities() const {
  std::vector<double> p(shifts_.size());
  const double base = 1.0 / static_cast<double>(shifts_.size());
  std::transform(shifts_.begin(), shifts_.end(), p.begin(), [base](double u) { return base + u; });
  return p;
}

bool WeightShift::is_feasible(double tol) const {
  if (shifts_.empty()) return true;
  const double floor = -1.0 / static_cast<double>(shifts_.size());
  double sum = 0.0;
  for (double u : shifts_) {
    if (!std::isfinite(u) || u < floor - tol) return false;
    sum += u;
  }
  return std::abs(sum) <= tol;
}

void ReweightConfig::validate() const {
  require_gamma(gamma);
  if (!(mu > 0.0 && mu <= 1.0)) throw InvalidInput("mu must lie in (0, 1]");
  if (contamination_estimate &&
      !(*contamination_estimate >= 0.0 && *contamination_estimate <= 1.0)) {
    throw InvalidInput("contamination estimate must lie in [0, 1]");
  }
}

LossPartition partition_losses(std::span<const double> losses, double gamma) {
  require_losses(losses);
  require_gamma(gamma);

  LossPartition part;
  part.gamma = gamma;
  part.c_min = *std::min_element(losses.begin(), losses.end());
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const double excess = losses[i] - part.c_min;
    if (excess <= kPartitionTol) {
      part.i_min.push_back(i);
    } else if (std::abs(excess - gamma) <= kPartitionTol) {
      part.i_big.push_back(i);
    } else if (excess < gamma) {
      part.i_mid.push_back(i);
    } else {
      part.chi.push_back(i);
    }
  }
  return part;
}

WeightShift solve_reweight(const LossPartition& partition, std::size_t n) {
  if (partition.size() != n || partition.i_min.empty()) {
    throw InvalidInput("partition does not cover the sample set");
  }
  std::vector<double> u(n, 0.0);
  if (!partition.chi.empty()) {
    const double nd = static_cast<double>(n);
    const double pruned = -1.0 / nd;
    const double gain = static_cast<double>(partition.chi.size()) /
                        (nd * static_cast<double>(partition.i_min.size()));
    for (std::size_t i : partition.chi) u[i] = pruned;
    for (std::size_t i : partition.i_min) u[i] = gain;
  }
  return WeightShift::from_values(std::move(u));
}

WeightShift solve_reweight(std::span<const double> losses, double gamma) {
  return solve_reweight(partition_losses(losses, gamma), losses.size());
}

WeightShift blend_weights(const WeightShift& u_prev, const WeightShift& u_star, double mu) {
  require_same_size(u_prev.size(), u_star.size(), "blend_weights");
  if (!(mu > 0.0 && mu <= 1.0)) throw InvalidInput("mu must lie in (0, 1]");
  std::vector<double> out(u_star.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = mu * u_star[i] + (1.0 - mu) * u_prev[i];
  }
  return WeightShift::from_values(std::move(out));
}

double gamma_floor(double c_min) noexcept { return 1e-9 * std::max(1.0, std::abs(c_min)); }

double auto_tune_gamma(std::span<const double> losses, double contamination_estimate) {
  require_losses(losses);
  if (!(contamination_estimate >= 0.0 && contamination_estimate <= 1.0)) {
    throw InvalidInput("contamination estimate must lie in [0, 1]");
  }
  std::vector<double> sorted(losses.begin(), losses.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const double n = static_cast<double>(sorted.size());
  const double c_min = sorted.back();

  // Walk the distinct loss values from the top. The number of losses strictly
  // above sorted[k] is k at the first occurrence of each value, and it only
  // grows as we descend, so the first hit is the largest admissible level.
  std::optional<double> level;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    if (k > 0 && sorted[k] == sorted[k - 1]) continue;
    if (static_cast<double>(k) / n >= contamination_estimate) {
      level = sorted[k];
      break;
    }
  }
  if (!level) return gamma_floor(c_min);
  const double gamma = *level - c_min;
  return gamma > 0.0 ? gamma : gamma_floor(c_min);
}

double reweight_objective(std::span<const double> losses, const WeightShift& u, double gamma) {
  require_same_size(losses.size(), u.size(), "reweight_objective");
  if (losses.empty()) throw InvalidInput("loss vector is empty");
  const double base = 1.0 / static_cast<double>(losses.size());
  double expected = 0.0;
  double l1 = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    expected += (base + u[i]) * losses[i];
    l1 += std::abs(u[i]);
  }
  return expected + 0.5 * gamma * l1;
}

KktCertificate check_kkt(std::span<const double> losses, const WeightShift& u, double gamma,
                         double tol) {
  require_losses(losses);
  require_gamma(gamma);
  require_same_size(losses.size(), u.size(), "check_kkt");

  const double half = 0.5 * gamma;
  const double floor = -1.0 / static_cast<double>(u.size());
  KktCertificate cert;
  cert.lambda = *std::min_element(losses.begin(), losses.end()) + half;
  const double lambda = cert.lambda;

  for (std::size_t i = 0; i < losses.size(); ++i) {
    const double c = losses[i];
    bool ok;
    if (u[i] > tol) {
      ok = std::abs(lambda - (c + half)) <= tol;
    } else if (u[i] <= floor + tol) {
      ok = lambda <= c - half + tol;
    } else if (u[i] >= -tol) {
      ok = lambda >= c - half - tol && lambda <= c + half + tol;
    } else {
      ok = std::abs(lambda - (c - half)) <= tol;
    }
    if (!ok) cert.violations.push_back(i);
  }
  return cert;
}

double tv_distance(const WeightShift& u) {
  double l1 = 0.0;
  for (double v : u.values()) l1 += std::abs(v);
  return 0.5 * l1;
}

}  // namespace rrm
