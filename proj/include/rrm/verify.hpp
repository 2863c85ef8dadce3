#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rrm/reweight.hpp"

namespace rrm::verify {

/// Closed-form solver under test. Swappable so that deliberately broken
/// variants can be checked against the suites.
using Solver = std::function<WeightShift(std::span<const double>, double)>;

struct SuiteResult {
  std::string name;
  std::size_t instances = 0;
  std::size_t failures = 0;
  double seconds = 0.0;
  /// First failing instance with enough detail to replay it; null if none.
  nlohmann::json first_failure;

  bool passed() const noexcept { return instances > 0 && failures == 0; }
};

/// Random reweighting instances: N uniform in [min_n, max_n], distinct losses
/// uniform in [0, loss_scale), gamma cycling through `gammas`.
struct InstanceConfig {
  std::size_t instances = 1000;
  std::size_t min_n = 2;
  std::size_t max_n = 6;
  std::vector<double> gammas = {0.1, 1.0, 10.0};
  double loss_scale = 10.0;
  std::uint64_t seed = 20240611;
  double tol = 1e-9;
};

struct Instance {
  std::vector<double> losses;
  double gamma = 0.0;
};

std::vector<Instance> make_instances(const InstanceConfig& config);

nlohmann::json to_json(const Instance& instance);
Instance instance_from_json(const nlohmann::json& doc);

/// Closed-form objective equals the LP optimum and the KKT conditions hold.
SuiteResult oracle_equivalence(const InstanceConfig& config, const Solver& solver);

/// tv = |chi|/N, pruned entries exactly -1/N, middle entries exactly 0.
SuiteResult closed_form_identities(const InstanceConfig& config, const Solver& solver);

/// The LP without the sum constraint never exceeds the constrained optimum
/// (same penalty coefficient on both sides).
SuiteResult relaxation_ordering(const InstanceConfig& config);

/// Auto-tuned gamma prunes at least the requested fraction.
SuiteResult auto_tune_pruning(std::uint64_t seed, std::size_t trials = 100,
                              std::vector<double> fractions = {0.1, 0.25, 0.5});

struct GradientCheckConfig {
  std::size_t models = 100;
  std::size_t max_parameters = 50;
  double step = 1e-5;
  double tol = 1e-4;
  std::uint64_t seed = 7;
};

/// Parameter and input gradients against central differences for every loss.
SuiteResult gradient_check(const GradientCheckConfig& config);

/// FGSM moves each coordinate by exactly -eps, 0 or +eps along the gradient
/// sign, and eps = 0 returns the input.
SuiteResult fgsm_contract(std::uint64_t seed, std::size_t inputs = 1000);

/// Re-runs the oracle and identity checks on one instance.
SuiteResult replay(const Instance& instance, const Solver& solver, double tol = 1e-9);

struct Report {
  std::vector<SuiteResult> suites;
  bool passed() const;
  nlohmann::json to_json() const;
};

Report run_all(std::uint64_t seed, const Solver& solver);

/// The library closed-form solver as a Solver.
Solver default_solver();

}  // namespace rrm::verify
