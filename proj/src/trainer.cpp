#include "rrm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace rrm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr Eigen::Index kEvalChunk = 4096;

// Shuffling draws from a stream separate from parameter initialization.
constexpr std::uint64_t kShuffleStream = 0x9E3779B97F4A7C15ULL;

Matrix gather_rows(const Matrix& src, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), src.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = src.row(static_cast<Eigen::Index>(rows[r]));
  }
  return out;
}

std::vector<double> full_losses(const ModelState& model, const Dataset& data, LossKind kind) {
  std::vector<double> losses;
  losses.reserve(data.size());
  const Eigen::Index n = data.features.rows();
  for (Eigen::Index start = 0; start < n; start += kEvalChunk) {
    const Eigen::Index len = std::min(kEvalChunk, n - start);
    const Matrix probs = forward(model, data.features.middleRows(start, len));
    const auto chunk = loss_per_sample(
        probs, std::span(data.observed_labels).subspan(static_cast<std::size_t>(start),
                                                       static_cast<std::size_t>(len)),
        kind);
    losses.insert(losses.end(), chunk.begin(), chunk.end());
  }
  return losses;
}

double accuracy_or_nan(const ModelState& model, const Matrix& x, std::span<const int> labels) {
  return labels.empty() ? kNaN : accuracy(model, x, labels);
}

double perturbed_accuracy(const ModelState& model, const Dataset& test, double epsilon,
                          LossKind kind) {
  if (test.size() == 0) return kNaN;
  std::size_t hits = 0;
  const Eigen::Index n = test.features.rows();
  for (Eigen::Index start = 0; start < n; start += kEvalChunk) {
    const Eigen::Index len = std::min(kEvalChunk, n - start);
    const auto labels = std::span(test.clean_labels)
                            .subspan(static_cast<std::size_t>(start), static_cast<std::size_t>(len));
    const Matrix attacked =
        fgsm_perturb_batch(model, test.features.middleRows(start, len), labels, epsilon, kind);
    const auto pred = predict(model, attacked);
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels[i];
  }
  return static_cast<double>(hits) / static_cast<double>(test.size());
}

}  // namespace

std::string_view to_string(TrainMode mode) noexcept {
  switch (mode) {
    case TrainMode::kErm: return "erm";
    case TrainMode::kRrm: return "rrm";
    case TrainMode::kArrm: return "arrm";
  }
  return "?";
}

TrainMode parse_train_mode(std::string_view name) {
  if (name == "erm") return TrainMode::kErm;
  if (name == "rrm") return TrainMode::kRrm;
  if (name == "arrm") return TrainMode::kArrm;
  throw InvalidInput("unknown mode '" + std::string(name) + "' (expected erm, rrm or arrm)");
}

void TrainConfig::validate() const {
  architecture.validate();
  if (!(epsilon_train >= 0.0 && epsilon_train <= 1.0)) {
    throw InvalidInput("epsilon_train must lie in [0, 1]");
  }
  if (mode == TrainMode::kArrm && !(epsilon_train > 0.0)) {
    throw InvalidInput("mode arrm requires epsilon_train > 0");
  }
  if (mode == TrainMode::kRrm && epsilon_train != 0.0) {
    throw InvalidInput("mode rrm requires epsilon_train = 0 (use arrm for perturbed training)");
  }
  if (epochs_per_iteration < 1) throw InvalidInput("epochs_per_iteration must be >= 1");
  if (batch_size < 1) throw InvalidInput("batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidInput("learning_rate must be positive");
  }
  if (max_iterations < 1) throw InvalidInput("max_iterations must be >= 1");
  if (patience < 1) throw InvalidInput("patience must be >= 1");
  for (double e : epsilon_test) {
    if (!(e >= 0.0 && e <= 1.0)) throw InvalidInput("epsilon_test values must lie in [0, 1]");
  }
  reweight.validate();
}

std::array<std::string_view, WeightHistogram::kBuckets> WeightHistogram::labels() {
  return {">>0", "~0", "(-0.25,0)", "(-0.50,-0.25]", "(-0.75,-0.50]", "[-1.00,-0.75]"};
}

std::size_t WeightHistogram::bucket_of(double r) {
  // Pruned-and-blended shifts land exactly on the quarter marks; the small
  // slack keeps rounding from pushing them into the neighbouring bucket.
  constexpr double slack = 1e-9;
  if (r <= -0.75 + slack) return 5;
  if (r <= -0.50 + slack) return 4;
  if (r <= -0.25 + slack) return 3;
  if (r < -kZeroBand) return 2;
  if (r <= kZeroBand) return 1;
  return 0;
}

WeightHistogram weight_histogram(const WeightShift& u, std::span<const std::size_t> contaminated) {
  WeightHistogram h;
  const double n = static_cast<double>(u.size());
  std::vector<bool> mask(u.size(), false);
  for (std::size_t i : contaminated) {
    if (i >= u.size()) throw InvalidInput("contaminated index out of range");
    mask[i] = true;
  }
  for (std::size_t i = 0; i < u.size(); ++i) {
    auto& counts = mask[i] ? h.contaminated : h.clean;
    ++counts[WeightHistogram::bucket_of(u[i] * n)];
  }
  return h;
}

double RunRecord::reported_test_accuracy() const {
  return has_validation ? test_at_peak_validation : final_test_accuracy;
}

double accuracy(const ModelState& model, const Matrix& features, std::span<const int> labels) {
  if (labels.empty()) throw InvalidInput("accuracy of an empty set");
  std::size_t hits = 0;
  const Eigen::Index n = features.rows();
  for (Eigen::Index start = 0; start < n; start += kEvalChunk) {
    const Eigen::Index len = std::min(kEvalChunk, n - start);
    const auto pred = predict(model, features.middleRows(start, len));
    for (std::size_t i = 0; i < pred.size(); ++i) {
      hits += pred[i] == labels[static_cast<std::size_t>(start) + i];
    }
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

ModelState gradient_step(ModelState model, const Dataset& train, const WeightShift& u,
                         const TrainConfig& config, std::mt19937_64& rng) {
  const std::size_t n = train.size();
  if (n == 0) throw InvalidInput("training set is empty");
  if (u.size() != n) throw InvalidInput("weight shift does not match the training set");
  if (!u.is_feasible()) throw InvalidInput("weight shift is not feasible");

  const auto batch = static_cast<std::size_t>(config.batch_size);
  const double nd = static_cast<double>(n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < config.epochs_per_iteration; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0, b = 0; start < n; start += batch, ++b) {
      const std::size_t len = std::min(batch, n - start);
      Batch bt;
      bt.sample_ids.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                           order.begin() + static_cast<std::ptrdiff_t>(start + len));
      bt.features = gather_rows(train.features, bt.sample_ids);
      bt.labels.reserve(len);
      for (std::size_t id : bt.sample_ids) bt.labels.push_back(train.observed_labels[id]);

      const double bd = static_cast<double>(len);
      bt.weights.resize(len);
      if (config.mode == TrainMode::kErm) {
        std::fill(bt.weights.begin(), bt.weights.end(), 1.0 / bd);
      } else {
        for (std::size_t k = 0; k < len; ++k) {
          bt.weights[k] = (1.0 / nd + u[bt.sample_ids[k]]) * (nd / bd);
        }
      }

      try {
        if (config.epsilon_train > 0.0) {
          bt.features = fgsm_perturb_batch(model, bt.features, bt.labels, config.epsilon_train,
                                           config.loss);
        }
        const std::vector<double> grad = grad_params_weighted(model, bt, config.loss);
        for (std::size_t p = 0; p < grad.size(); ++p) {
          model.theta[p] -= config.learning_rate * grad[p];
        }
      } catch (const NumericFailure& e) {
        throw NumericFailure(std::string(e.what()) + " (epoch " + std::to_string(epoch + 1) +
                             ", batch " + std::to_string(b + 1) + ")");
      }
    }
  }
  return model;
}

ReweightOutcome reweight_step(const ModelState& model, const Dataset& train,
                              const WeightShift& u_prev, const TrainConfig& config) {
  if (u_prev.size() != train.size()) {
    throw InvalidInput("previous weight shift does not match the training set");
  }
  ReweightOutcome out;
  out.losses = full_losses(model, train, config.loss);
  if (config.reweight.contamination_estimate) {
    out.gamma = auto_tune_gamma(out.losses, *config.reweight.contamination_estimate);
    out.mu = 1.0;
  } else {
    out.gamma = config.reweight.gamma;
    out.mu = config.reweight.mu;
  }
  out.partition = partition_losses(out.losses, out.gamma);
  out.target = solve_reweight(out.partition, train.size());
  out.weights = blend_weights(u_prev, out.target, out.mu);
  return out;
}

RunResult run(const Splits& data, const TrainConfig& config) {
  config.validate();
  const Dataset& train = data.train;
  train.validate();
  if (train.size() == 0) throw InvalidInput("training split is empty");
  if (train.dim() != config.architecture.input_dim()) {
    throw InvalidInput("architecture input width does not match the data");
  }
  if (static_cast<std::size_t>(train.num_classes) != config.architecture.num_classes()) {
    throw InvalidInput("architecture class count does not match the data");
  }

  RunResult result;
  result.model = init_params(config.architecture, config.seed);
  result.best_model = result.model;
  result.weights = WeightShift(train.size());
  RunRecord& rec = result.record;
  rec.has_validation = data.validation.size() > 0;

  std::mt19937_64 rng(config.seed ^ kShuffleStream);
  const std::vector<bool> mask = train.contaminated_mask();
  double best_val = -1.0;
  rec.max_test_accuracy = kNaN;

  for (int it = 1; it <= config.max_iterations; ++it) {
    IterationRecord ir;
    ir.iteration = it;
    ir.epochs_completed = it * config.epochs_per_iteration;
    try {
      result.model = gradient_step(std::move(result.model), train, result.weights, config, rng);
      if (config.mode == TrainMode::kErm) {
        ir.gamma = kNaN;
        ir.mu = kNaN;
        const auto losses = full_losses(result.model, train, config.loss);
        ir.loss_mean = std::accumulate(losses.begin(), losses.end(), 0.0) /
                       static_cast<double>(losses.size());
        ir.loss_min = *std::min_element(losses.begin(), losses.end());
        ir.loss_max = *std::max_element(losses.begin(), losses.end());
      } else {
        ReweightOutcome rw = reweight_step(result.model, train, result.weights, config);
        result.weights = std::move(rw.weights);
        ir.gamma = rw.gamma;
        ir.mu = rw.mu;
        ir.loss_mean = std::accumulate(rw.losses.begin(), rw.losses.end(), 0.0) /
                       static_cast<double>(rw.losses.size());
        ir.loss_min = rw.partition.c_min;
        ir.loss_max = *std::max_element(rw.losses.begin(), rw.losses.end());
        ir.pruned = rw.partition.chi.size();
        const auto hits = static_cast<double>(std::count_if(
            rw.partition.chi.begin(), rw.partition.chi.end(), [&](std::size_t i) { return mask[i]; }));
        ir.pruned_precision = ir.pruned ? hits / static_cast<double>(ir.pruned) : kNaN;
        ir.pruned_recall = train.contaminated.empty()
                               ? kNaN
                               : hits / static_cast<double>(train.contaminated.size());
      }
    } catch (const Error& e) {
      throw RunFailure("iteration " + std::to_string(it) + ": " + e.what(), rec);
    }
    if (config.mode == TrainMode::kErm) {
      ir.pruned_precision = kNaN;
      ir.pruned_recall = kNaN;
    }

    ir.tv_distance = tv_distance(result.weights);
    ir.histogram = weight_histogram(result.weights, train.contaminated);
    ir.train_accuracy = accuracy(result.model, train.features, train.observed_labels);
    ir.train_clean_accuracy = accuracy(result.model, train.features, train.clean_labels);
    ir.validation_accuracy = accuracy_or_nan(result.model, data.validation.features,
                                             data.validation.observed_labels);
    ir.test_accuracy = accuracy_or_nan(result.model, data.test.features, data.test.clean_labels);
    rec.iterations.push_back(ir);

    if (!std::isnan(ir.test_accuracy) &&
        (std::isnan(rec.max_test_accuracy) || ir.test_accuracy > rec.max_test_accuracy)) {
      rec.max_test_accuracy = ir.test_accuracy;
    }
    if (rec.has_validation) {
      if (ir.validation_accuracy > best_val) {
        best_val = ir.validation_accuracy;
        rec.best_validation_iteration = it;
        rec.test_at_peak_validation = ir.test_accuracy;
        result.best_model = result.model;
      } else if (it - rec.best_validation_iteration >= config.patience) {
        rec.early_stopped = true;
        break;
      }
    }
  }

  rec.final_test_accuracy = rec.iterations.back().test_accuracy;
  if (!rec.has_validation) {
    rec.best_validation_iteration = rec.iterations.back().iteration;
    rec.test_at_peak_validation = rec.final_test_accuracy;
    result.best_model = result.model;
  }
  for (double eps : config.epsilon_test) {
    rec.epsilon_test_accuracy.emplace_back(
        eps, perturbed_accuracy(result.best_model, data.test, eps, config.loss));
  }
  return result;
}

}  // namespace rrm
