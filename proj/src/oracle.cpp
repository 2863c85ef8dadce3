#include "rrm/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rrm/error.hpp"

namespace rrm::verify {

namespace {

// Dense LP in standard form: minimize cost.x subject to A x = rhs, x >= 0.
struct StandardForm {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;  // row-major rows x cols
  std::vector<double> rhs;
  std::vector<double> cost;

  double& at(std::size_t r, std::size_t c) { return a[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
};

constexpr double kPivotTol = 1e-12;
constexpr double kNonnegTol = 1e-10;

// Solves B x = rhs for the square submatrix picked by `basis`. Returns
// nothing when the submatrix is singular.
std::optional<std::vector<double>> solve_basis(const StandardForm& lp,
                                               const std::vector<std::size_t>& basis,
                                               std::vector<double>& work) {
  const std::size_t m = lp.rows;
  const std::size_t w = m + 1;
  work.assign(m * w, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t k = 0; k < m; ++k) work[r * w + k] = lp.at(r, basis[k]);
    work[r * w + m] = lp.rhs[r];
  }
  for (std::size_t col = 0; col < m; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < m; ++r) {
      if (std::abs(work[r * w + col]) > std::abs(work[pivot * w + col])) pivot = r;
    }
    if (std::abs(work[pivot * w + col]) < kPivotTol) return std::nullopt;
    if (pivot != col) {
      for (std::size_t k = 0; k < w; ++k) std::swap(work[pivot * w + k], work[col * w + k]);
    }
    for (std::size_t r = col + 1; r < m; ++r) {
      const double f = work[r * w + col] / work[col * w + col];
      if (f == 0.0) continue;
      for (std::size_t k = col; k < w; ++k) work[r * w + k] -= f * work[col * w + k];
    }
  }
  std::vector<double> x(m);
  for (std::size_t r = m; r-- > 0;) {
    double acc = work[r * w + m];
    for (std::size_t k = r + 1; k < m; ++k) acc -= work[r * w + k] * x[k];
    x[r] = acc / work[r * w + r];
  }
  return x;
}

// Exhaustive search over every basis: the optimum of a bounded feasible LP is
// attained at some basic feasible solution.
std::vector<double> enumerate_vertices(const StandardForm& lp, double& best_cost) {
  const std::size_t m = lp.rows;
  const std::size_t n = lp.cols;
  best_cost = std::numeric_limits<double>::infinity();
  std::vector<double> best_x;
  std::vector<std::size_t> basis(m);
  for (std::size_t k = 0; k < m; ++k) basis[k] = k;
  std::vector<double> work;

  while (true) {
    if (auto xb = solve_basis(lp, basis, work)) {
      bool feasible = true;
      double cost = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        if ((*xb)[k] < -kNonnegTol) {
          feasible = false;
          break;
        }
        cost += lp.cost[basis[k]] * (*xb)[k];
      }
      if (feasible && cost < best_cost) {
        best_cost = cost;
        best_x.assign(n, 0.0);
        for (std::size_t k = 0; k < m; ++k) best_x[basis[k]] = std::max(0.0, (*xb)[k]);
      }
    }
    // Next m-combination of {0..n-1} in lexicographic order.
    std::size_t k = m;
    while (k > 0 && basis[k - 1] == n - m + (k - 1)) --k;
    if (k == 0) break;
    ++basis[k - 1];
    for (std::size_t j = k; j < m; ++j) basis[j] = basis[j - 1] + 1;
  }
  if (best_x.empty()) throw NumericFailure("oracle LP has no basic feasible solution");
  return best_x;
}

void check_instance(std::span<const double> losses) {
  if (losses.empty()) throw InvalidInput("loss vector is empty");
  if (losses.size() > kOracleMaxSamples) {
    throw UnsupportedScale("oracle handles at most " + std::to_string(kOracleMaxSamples) +
                           " samples, got " + std::to_string(losses.size()));
  }
  for (double c : losses) {
    if (!std::isfinite(c)) throw InvalidInput("loss vector has a non-finite entry");
  }
}

// Columns: a_i (positive part of u), b_i (negative part), s_i (slack of
// b_i <= 1/N). Rows: b_i + s_i = 1/N, plus optionally sum(a) - sum(b) = 0.
StandardForm build_lp(std::span<const double> losses, double penalty, bool sum_to_zero) {
  const std::size_t n = losses.size();
  const double base = 1.0 / static_cast<double>(n);
  StandardForm lp;
  lp.rows = n + (sum_to_zero ? 1 : 0);
  lp.cols = 3 * n;
  lp.a.assign(lp.rows * lp.cols, 0.0);
  lp.rhs.assign(lp.rows, 0.0);
  lp.cost.assign(lp.cols, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    lp.at(i, n + i) = 1.0;
    lp.at(i, 2 * n + i) = 1.0;
    lp.rhs[i] = base;
    lp.cost[i] = losses[i] + penalty;
    lp.cost[n + i] = -losses[i] + penalty;
  }
  if (sum_to_zero) {
    for (std::size_t i = 0; i < n; ++i) {
      lp.at(n, i) = 1.0;
      lp.at(n, n + i) = -1.0;
    }
  }
  return lp;
}

double constant_term(std::span<const double> losses) {
  double acc = 0.0;
  for (double c : losses) acc += c;
  return acc / static_cast<double>(losses.size());
}

}  // namespace

LpSolution oracle_lp(std::span<const double> losses, double gamma) {
  check_instance(losses);
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidInput("gamma must be positive");
  const std::size_t n = losses.size();
  const StandardForm lp = build_lp(losses, 0.5 * gamma, true);
  double cost = 0.0;
  const std::vector<double> x = enumerate_vertices(lp, cost);

  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = x[i] - x[n + i];
  return {WeightShift::from_values(std::move(u)), constant_term(losses) + cost};
}

double oracle_lp_relaxed(std::span<const double> losses, double penalty) {
  check_instance(losses);
  if (!(penalty >= 0.0) || !std::isfinite(penalty)) {
    throw InvalidInput("penalty must be non-negative");
  }
  for (double c : losses) {
    if (c + penalty < 0.0) throw InvalidInput("relaxed program is unbounded (c_i + penalty < 0)");
  }
  const StandardForm lp = build_lp(losses, penalty, false);
  double cost = 0.0;
  enumerate_vertices(lp, cost);
  return constant_term(losses) + cost;
}

}  // namespace rrm::verify
