#include "rrm/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "rrm/error.hpp"
#include "rrm/model.hpp"
#include "rrm/oracle.hpp"

namespace rrm::verify {

namespace {

using Clock = std::chrono::steady_clock;

SuiteResult named(std::string name) {
  SuiteResult r;
  r.name = std::move(name);
  return r;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<double> distinct_uniform(std::size_t n, double scale, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> draw(0.0, scale);
  std::set<double> seen;
  std::vector<double> out;
  while (out.size() < n) {
    const double v = draw(rng);
    if (seen.insert(v).second) out.push_back(v);
  }
  return out;
}

void record_failure(SuiteResult& r, std::size_t index, nlohmann::json instance,
                    const std::string& detail) {
  if (r.failures++ == 0) {
    r.first_failure = {{"suite", r.name}, {"index", index}, {"instance", std::move(instance)},
                       {"detail", detail}};
  }
}

// One oracle comparison; returns an empty string on success.
std::string check_equivalence(const Instance& in, const Solver& solver, double tol) {
  const WeightShift u = solver(in.losses, in.gamma);
  if (u.size() != in.losses.size() || !u.is_feasible()) return "solver returned an infeasible shift";
  const double closed = reweight_objective(in.losses, u, in.gamma);
  const double lp = oracle_lp(in.losses, in.gamma).objective;
  if (!(std::abs(closed - lp) <= tol)) {
    return "closed-form objective " + std::to_string(closed) + " vs LP optimum " +
           std::to_string(lp);
  }
  const KktCertificate kkt = check_kkt(in.losses, u, in.gamma);
  if (!kkt) return "KKT conditions fail at index " + std::to_string(kkt.violations.front());
  return {};
}

std::string check_identities(const Instance& in, const Solver& solver) {
  const std::size_t n = in.losses.size();
  const WeightShift u = solver(in.losses, in.gamma);
  if (u.size() != n) return "solver returned the wrong length";
  const LossPartition part = partition_losses(in.losses, in.gamma);
  const double floor = -1.0 / static_cast<double>(n);
  for (std::size_t i : part.chi) {
    if (u[i] != floor) return "pruned index " + std::to_string(i) + " is not at -1/N";
  }
  for (std::size_t i : part.i_mid) {
    if (u[i] != 0.0) return "middle index " + std::to_string(i) + " carries a nonzero shift";
  }
  const double expect = static_cast<double>(part.chi.size()) / static_cast<double>(n);
  if (!(std::abs(tv_distance(u) - expect) <= 1e-12)) {
    return "tv distance " + std::to_string(tv_distance(u)) + " differs from |chi|/N";
  }
  return {};
}

// Small random classifier for the gradient and FGSM suites.
ModelState random_model(std::mt19937_64& rng, std::size_t max_params) {
  std::uniform_int_distribution<std::size_t> dim(2, 6);
  std::uniform_int_distribution<std::size_t> classes(2, 4);
  std::uniform_int_distribution<std::size_t> hidden(2, 5);
  std::bernoulli_distribution coin(0.5);
  for (;;) {
    const std::size_t d = dim(rng);
    const std::size_t k = classes(rng);
    Architecture arch;
    if (coin(rng)) {
      arch = Architecture::softmax_linear(d, k);
    } else {
      arch = Architecture::mlp(d, {hidden(rng)}, k,
                               coin(rng) ? Activation::kRelu : Activation::kTanh, coin(rng));
    }
    if (arch.parameter_count() > max_params) continue;
    ModelState m = init_params(arch, rng());
    // Non-zero biases so that their gradients are exercised too.
    std::normal_distribution<double> jitter(0.0, 0.3);
    for (double& t : m.theta) t += jitter(rng);
    return m;
  }
}

double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-8});
}

double weighted_loss(const ModelState& m, const Batch& b, LossKind kind) {
  const auto losses = evaluate_losses(m, b.features, b.labels, kind);
  double s = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) s += b.weights[i] * losses[i];
  return s;
}

}  // namespace

std::vector<Instance> make_instances(const InstanceConfig& config) {
  if (config.min_n < 1 || config.max_n < config.min_n || config.gammas.empty()) {
    throw InvalidInput("bad instance configuration");
  }
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> size(config.min_n, config.max_n);
  std::vector<Instance> out;
  out.reserve(config.instances);
  for (std::size_t k = 0; k < config.instances; ++k) {
    Instance in;
    in.gamma = config.gammas[k % config.gammas.size()];
    in.losses = distinct_uniform(size(rng), config.loss_scale, rng);
    out.push_back(std::move(in));
  }
  return out;
}

nlohmann::json to_json(const Instance& instance) {
  return {{"losses", instance.losses}, {"gamma", instance.gamma}};
}

Instance instance_from_json(const nlohmann::json& doc) {
  const nlohmann::json& src = doc.contains("instance") ? doc.at("instance") : doc;
  try {
    Instance in;
    in.losses = src.at("losses").get<std::vector<double>>();
    in.gamma = src.at("gamma").get<double>();
    return in;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("replay instance: ") + e.what());
  }
}

SuiteResult oracle_equivalence(const InstanceConfig& config, const Solver& solver) {
  SuiteResult r = named("oracle_equivalence");
  const auto start = Clock::now();
  const auto instances = make_instances(config);
  for (std::size_t k = 0; k < instances.size(); ++k) {
    ++r.instances;
    const std::string why = check_equivalence(instances[k], solver, config.tol);
    if (!why.empty()) record_failure(r, k, to_json(instances[k]), why);
  }
  r.seconds = seconds_since(start);
  return r;
}

SuiteResult closed_form_identities(const InstanceConfig& config, const Solver& solver) {
  SuiteResult r = named("closed_form_identities");
  const auto start = Clock::now();
  const auto instances = make_instances(config);
  for (std::size_t k = 0; k < instances.size(); ++k) {
    ++r.instances;
    const std::string why = check_identities(instances[k], solver);
    if (!why.empty()) record_failure(r, k, to_json(instances[k]), why);
  }
  r.seconds = seconds_since(start);
  return r;
}

SuiteResult relaxation_ordering(const InstanceConfig& config) {
  SuiteResult r = named("relaxation_ordering");
  const auto start = Clock::now();
  const auto instances = make_instances(config);
  for (std::size_t k = 0; k < instances.size(); ++k) {
    ++r.instances;
    const auto& in = instances[k];
    const double constrained = oracle_lp(in.losses, in.gamma).objective;
    const double relaxed = oracle_lp_relaxed(in.losses, in.gamma / 2.0);
    if (!(relaxed <= constrained + config.tol)) {
      record_failure(r, k, to_json(in),
                     "relaxed optimum " + std::to_string(relaxed) + " exceeds constrained " +
                         std::to_string(constrained));
    }
  }
  r.seconds = seconds_since(start);
  return r;
}

SuiteResult auto_tune_pruning(std::uint64_t seed, std::size_t trials,
                              std::vector<double> fractions) {
  if (fractions.empty()) throw InvalidInput("no pruning fractions given");
  SuiteResult r = named("auto_tune_pruning");
  const auto start = Clock::now();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> size(10, 200);
  for (std::size_t t = 0; t < trials; ++t) {
    ++r.instances;
    const double target = fractions[t % fractions.size()];
    const std::vector<double> c = distinct_uniform(size(rng), 10.0, rng);
    const double gamma = auto_tune_gamma(c, target);
    const WeightShift u = blend_weights(WeightShift(c.size()), solve_reweight(c, gamma), 1.0);
    const double floor = -1.0 / static_cast<double>(c.size());
    const auto pruned = std::count(u.values().begin(), u.values().end(), floor);
    const double frac = static_cast<double>(pruned) / static_cast<double>(c.size());
    if (frac < target) {
      record_failure(r, t, {{"losses", c}, {"contamination_estimate", target}},
                     "pruned fraction " + std::to_string(frac) + " below " +
                         std::to_string(target));
    }
  }
  r.seconds = seconds_since(start);
  return r;
}

SuiteResult gradient_check(const GradientCheckConfig& config) {
  SuiteResult r = named("gradient_check");
  const auto start = Clock::now();
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double h = config.step;

  for (std::size_t m = 0; m < config.models; ++m) {
    const ModelState model = random_model(rng, config.max_parameters);
    const std::size_t d = model.architecture.input_dim();
    const std::size_t k = model.architecture.num_classes();
    std::uniform_int_distribution<int> label(0, static_cast<int>(k) - 1);

    Batch batch;
    const std::size_t b = 3;
    batch.features.resize(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < batch.features.size(); ++i) batch.features.data()[i] = unit(rng);
    for (std::size_t i = 0; i < b; ++i) {
      batch.labels.push_back(label(rng));
      batch.sample_ids.push_back(i);
      batch.weights.push_back(unit(rng));
    }

    for (LossKind kind : {LossKind::kCce, LossKind::kMae, LossKind::kMse}) {
      ++r.instances;
      const nlohmann::json where = {{"model", m},
                                    {"loss", std::string(to_string(kind))},
                                    {"widths", model.architecture.widths}};

      const std::vector<double> g = grad_params_weighted(model, batch, kind);
      std::vector<double> fd(g.size());
      ModelState probe = model;
      for (std::size_t p = 0; p < g.size(); ++p) {
        const double keep = probe.theta[p];
        probe.theta[p] = keep + h;
        const double up = weighted_loss(probe, batch, kind);
        probe.theta[p] = keep - h;
        const double down = weighted_loss(probe, batch, kind);
        probe.theta[p] = keep;
        fd[p] = (up - down) / (2.0 * h);
      }
      const double perr = relative_error(g, fd);

      std::vector<double> x(batch.features.row(0).data(), batch.features.row(0).data() + d);
      const int y = batch.labels[0];
      const std::vector<double> gx = grad_input(model, x, y, kind);
      std::vector<double> fdx(d);
      for (std::size_t j = 0; j < d; ++j) {
        Matrix row(1, static_cast<Eigen::Index>(d));
        for (std::size_t q = 0; q < d; ++q) row(0, static_cast<Eigen::Index>(q)) = x[q];
        const std::vector<int> ys = {y};
        row(0, static_cast<Eigen::Index>(j)) = x[j] + h;
        const double up = evaluate_losses(model, row, ys, kind)[0];
        row(0, static_cast<Eigen::Index>(j)) = x[j] - h;
        const double down = evaluate_losses(model, row, ys, kind)[0];
        fdx[j] = (up - down) / (2.0 * h);
      }
      const double xerr = relative_error(gx, fdx);

      if (!(perr <= config.tol) || !(xerr <= config.tol)) {
        record_failure(r, m, where,
                       "relative error params " + std::to_string(perr) + ", input " +
                           std::to_string(xerr));
      }
    }
  }
  r.seconds = seconds_since(start);
  return r;
}

SuiteResult fgsm_contract(std::uint64_t seed, std::size_t inputs) {
  SuiteResult r = named("fgsm_contract");
  const auto start = Clock::now();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  constexpr double ulp = std::numeric_limits<double>::epsilon();
  const LossKind kinds[] = {LossKind::kCce, LossKind::kMae, LossKind::kMse};

  ModelState model;
  for (std::size_t t = 0; t < inputs; ++t) {
    if (t % 10 == 0) model = random_model(rng, 50);
    ++r.instances;
    const std::size_t d = model.architecture.input_dim();
    std::vector<double> x(d);
    for (double& v : x) v = unit(rng);
    const int y = std::uniform_int_distribution<int>(
        0, static_cast<int>(model.architecture.num_classes()) - 1)(rng);
    const double eps = unit(rng);
    const LossKind kind = kinds[t % 3];
    const nlohmann::json where = {{"x", x}, {"y", y}, {"epsilon", eps},
                                  {"loss", std::string(to_string(kind))}};

    if (fgsm_perturb(model, x, y, 0.0, kind) != x) {
      record_failure(r, t, where, "epsilon 0 changed the input");
      continue;
    }
    const std::vector<double> g = grad_input(model, x, y, kind);
    const std::vector<double> xp = fgsm_perturb(model, x, y, eps, kind);
    for (std::size_t j = 0; j < d; ++j) {
      const double expect = g[j] > 0.0 ? x[j] + eps : g[j] < 0.0 ? x[j] - eps : x[j];
      const bool exact = xp[j] == expect;
      const bool bounded = std::abs(xp[j] - x[j]) <= eps * (1.0 + 4.0 * ulp) + 4.0 * ulp;
      if (!exact || !bounded) {
        record_failure(r, t, where, "coordinate " + std::to_string(j) + " moved off {-eps,0,+eps}");
        break;
      }
    }
  }
  r.seconds = seconds_since(start);
  return r;
}

SuiteResult replay(const Instance& instance, const Solver& solver, double tol) {
  SuiteResult r = named("replay");
  const auto start = Clock::now();
  r.instances = 1;
  std::string why = check_equivalence(instance, solver, tol);
  if (why.empty()) why = check_identities(instance, solver);
  if (why.empty()) {
    const double constrained = oracle_lp(instance.losses, instance.gamma).objective;
    if (!(oracle_lp_relaxed(instance.losses, instance.gamma / 2.0) <= constrained + tol)) {
      why = "relaxed optimum exceeds the constrained optimum";
    }
  }
  if (!why.empty()) record_failure(r, 0, to_json(instance), why);
  r.seconds = seconds_since(start);
  return r;
}

bool Report::passed() const {
  return !suites.empty() &&
         std::all_of(suites.begin(), suites.end(), [](const SuiteResult& s) { return s.passed(); });
}

nlohmann::json Report::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : suites) {
    arr.push_back({{"name", s.name},
                   {"instances", s.instances},
                   {"failures", s.failures},
                   {"passed", s.passed()},
                   {"first_failure", s.first_failure}});
  }
  return {{"passed", passed()}, {"suites", arr}};
}

Report run_all(std::uint64_t seed, const Solver& solver) {
  InstanceConfig inst;
  inst.seed = seed;
  GradientCheckConfig grad;
  grad.seed = seed + 1;
  Report rep;
  rep.suites.push_back(oracle_equivalence(inst, solver));
  rep.suites.push_back(closed_form_identities(inst, solver));
  rep.suites.push_back(relaxation_ordering(inst));
  rep.suites.push_back(auto_tune_pruning(seed + 2));
  rep.suites.push_back(gradient_check(grad));
  rep.suites.push_back(fgsm_contract(seed + 3));
  return rep;
}

Solver default_solver() {
  return [](std::span<const double> c, double gamma) { return solve_reweight(c, gamma); };
}

}  // namespace rrm::verify
