#include "rrm/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "rrm/error.hpp"

namespace rrm {

std::string_view to_string(LossKind kind) noexcept {
  switch (kind) {
    case LossKind::kCce: return "cce";
    case LossKind::kMae: return "mae";
    case LossKind::kMse: return "mse";
  }
  return "?";
}

std::string_view to_string(Activation act) noexcept {
  return act == Activation::kRelu ? "relu" : "tanh";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "cce") return LossKind::kCce;
  if (name == "mae") return LossKind::kMae;
  if (name == "mse") return LossKind::kMse;
  throw InvalidInput("unknown loss kind '" + std::string(name) + "' (expected cce, mae or mse)");
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw InvalidInput("unknown activation '" + std::string(name) + "' (expected relu or tanh)");
}

Architecture Architecture::softmax_linear(std::size_t input_dim, std::size_t num_classes) {
  Architecture a;
  a.widths = {input_dim, num_classes};
  return a;
}

Architecture Architecture::mlp(std::size_t input_dim, std::vector<std::size_t> hidden,
                               std::size_t num_classes, Activation act, bool bias) {
  Architecture a;
  a.widths.push_back(input_dim);
  a.widths.insert(a.widths.end(), hidden.begin(), hidden.end());
  a.widths.push_back(num_classes);
  a.activation = act;
  a.bias = bias;
  return a;
}

Architecture Architecture::mnist3() {
  return mlp(784, {320, 320, 200}, 3, Activation::kRelu, /*bias=*/false);
}

std::size_t Architecture::parameter_count() const {
  std::size_t count = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    count += widths[l] * widths[l + 1] + (bias ? widths[l + 1] : 0);
  }
  return count;
}

void Architecture::validate() const {
  if (widths.size() < 2) throw InvalidInput("architecture needs at least input and output widths");
  for (std::size_t w : widths) {
    if (w == 0) throw InvalidInput("architecture has a zero-width layer");
  }
  if (num_classes() < 2) throw InvalidInput("classifier needs at least two classes");
}

std::vector<LayerSlice> make_layout(const Architecture& arch) {
  arch.validate();
  std::vector<LayerSlice> layout;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    LayerSlice s;
    s.in = arch.widths[l];
    s.out = arch.widths[l + 1];
    s.weight_offset = offset;
    offset += s.in * s.out;
    s.bias_offset = offset;
    if (arch.bias) offset += s.out;
    layout.push_back(s);
  }
  return layout;
}

ModelState ModelState::from_parameters(Architecture arch, std::vector<double> theta,
                                       std::uint64_t seed) {
  ModelState m;
  m.layout = make_layout(arch);
  if (theta.size() != arch.parameter_count()) {
    throw InvalidInput("parameter vector has " + std::to_string(theta.size()) +
                       " entries, architecture needs " + std::to_string(arch.parameter_count()));
  }
  for (double v : theta) {
    if (!std::isfinite(v)) throw InvalidInput("parameter vector has a non-finite entry");
  }
  m.architecture = std::move(arch);
  m.theta = std::move(theta);
  m.seed = seed;
  return m;
}

ModelState init_params(const Architecture& arch, std::uint64_t seed) {
  ModelState m;
  m.layout = make_layout(arch);
  m.architecture = arch;
  m.seed = seed;
  m.theta.assign(arch.parameter_count(), 0.0);

  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < m.layout.size(); ++l) {
    const LayerSlice& s = m.layout[l];
    const bool hidden = l + 1 < m.layout.size();
    const double fan_in = static_cast<double>(s.in);
    const double fan_out = static_cast<double>(s.out);
    const double stddev = (hidden && arch.activation == Activation::kRelu)
                              ? std::sqrt(2.0 / fan_in)
                              : std::sqrt(2.0 / (fan_in + fan_out));
    std::normal_distribution<double> dist(0.0, stddev);
    for (std::size_t k = 0; k < s.in * s.out; ++k) m.theta[s.weight_offset + k] = dist(rng);
  }
  return m;
}

namespace {

using ConstWeights = Eigen::Map<const Matrix>;
using ConstBias = Eigen::Map<const Eigen::RowVectorXd>;

ConstWeights weights_of(const ModelState& m, const LayerSlice& s) {
  return ConstWeights(m.theta.data() + s.weight_offset, static_cast<Eigen::Index>(s.out),
                      static_cast<Eigen::Index>(s.in));
}

ConstBias bias_of(const ModelState& m, const LayerSlice& s) {
  return ConstBias(m.theta.data() + s.bias_offset, static_cast<Eigen::Index>(s.out));
}

void softmax_rows(Matrix& z) {
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
}

// Activations of every layer; acts[0] is the input, acts.back() the softmax.
struct ForwardPass {
  std::vector<Matrix> acts;
};

ForwardPass run_forward(const ModelState& m, const Matrix& x) {
  if (static_cast<std::size_t>(x.cols()) != m.architecture.input_dim()) {
    throw InvalidInput("feature dimension " + std::to_string(x.cols()) +
                       " does not match model input " +
                       std::to_string(m.architecture.input_dim()));
  }
  ForwardPass fp;
  fp.acts.reserve(m.layout.size() + 1);
  fp.acts.push_back(x);
  for (std::size_t l = 0; l < m.layout.size(); ++l) {
    const LayerSlice& s = m.layout[l];
    Matrix z = fp.acts.back() * weights_of(m, s).transpose();
    if (m.architecture.bias) z.rowwise() += bias_of(m, s);
    if (l + 1 < m.layout.size()) {
      if (m.architecture.activation == Activation::kRelu) {
        z = z.cwiseMax(0.0);
      } else {
        z = z.array().tanh().matrix();
      }
    } else {
      softmax_rows(z);
    }
    fp.acts.push_back(std::move(z));
  }
  return fp;
}

void check_labels(std::span<const int> labels, std::size_t rows, std::size_t classes) {
  if (labels.size() != rows) {
    throw InvalidInput("got " + std::to_string(labels.size()) + " labels for " +
                       std::to_string(rows) + " samples");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw InvalidInput("label " + std::to_string(y) + " outside [0, " +
                         std::to_string(classes) + ")");
    }
  }
}

double sign(double v) { return (v > 0.0) - (v < 0.0); }

// Gradient of each sample's loss with respect to the softmax logits.
Matrix logit_gradient(const Matrix& probs, std::span<const int> labels, LossKind kind) {
  const Eigen::Index k = probs.cols();
  Matrix dz(probs.rows(), k);
  Eigen::RowVectorXd g(k);
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    const auto p = probs.row(r);
    const int y = labels[static_cast<std::size_t>(r)];
    if (kind == LossKind::kCce) {
      // The clamp makes the loss locally constant below the floor.
      if (p(y) > kCceProbabilityFloor) {
        dz.row(r) = p;
        dz(r, y) -= 1.0;
      } else {
        dz.row(r).setZero();
      }
      continue;
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      const double diff = p(c) - (c == y ? 1.0 : 0.0);
      g(c) = kind == LossKind::kMae ? sign(diff) : 2.0 * diff;
    }
    const double gp = g.dot(p);
    dz.row(r) = p.array() * (g.array() - gp);
  }
  return dz;
}

struct Gradients {
  std::vector<double> params;
  Matrix inputs;
};

// Backpropagates sum_i w_i J_i. Parameter and/or input gradients on request.
Gradients backward(const ModelState& m, const ForwardPass& fp, std::span<const int> labels,
                   std::span<const double> weights, LossKind kind, bool want_params,
                   bool want_inputs) {
  Matrix dz = logit_gradient(fp.acts.back(), labels, kind);
  for (Eigen::Index r = 0; r < dz.rows(); ++r) dz.row(r) *= weights[static_cast<std::size_t>(r)];

  Gradients out;
  if (want_params) out.params.assign(m.theta.size(), 0.0);
  for (std::size_t l = m.layout.size(); l-- > 0;) {
    const LayerSlice& s = m.layout[l];
    const Matrix& a_prev = fp.acts[l];
    if (want_params) {
      Eigen::Map<Matrix> dw(out.params.data() + s.weight_offset, static_cast<Eigen::Index>(s.out),
                            static_cast<Eigen::Index>(s.in));
      dw.noalias() = dz.transpose() * a_prev;
      if (m.architecture.bias) {
        Eigen::Map<Eigen::RowVectorXd> db(out.params.data() + s.bias_offset,
                                          static_cast<Eigen::Index>(s.out));
        db = dz.colwise().sum();
      }
    }
    if (l == 0 && !want_inputs) break;
    Matrix da = dz * weights_of(m, s);
    if (l == 0) {
      out.inputs = std::move(da);
      break;
    }
    if (m.architecture.activation == Activation::kRelu) {
      dz = (a_prev.array() > 0.0).select(da, 0.0);
    } else {
      dz = da.array() * (1.0 - a_prev.array().square());
    }
  }

  if (want_params) {
    for (std::size_t i = 0; i < out.params.size(); ++i) {
      if (!std::isfinite(out.params[i])) {
        throw NumericFailure("non-finite parameter gradient at index " + std::to_string(i));
      }
    }
  }
  if (want_inputs && !out.inputs.allFinite()) {
    throw NumericFailure("non-finite input gradient");
  }
  return out;
}

Matrix row_matrix(std::span<const double> x) {
  Matrix m(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = x[i];
  return m;
}

}  // namespace

Matrix forward(const ModelState& model, const Matrix& features) {
  return std::move(run_forward(model, features).acts.back());
}

std::vector<double> loss_per_sample(const Matrix& probs, std::span<const int> labels,
                                    LossKind kind) {
  check_labels(labels, static_cast<std::size_t>(probs.rows()),
               static_cast<std::size_t>(probs.cols()));
  std::vector<double> losses(labels.size());
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    double loss = 0.0;
    switch (kind) {
      case LossKind::kCce:
        loss = -std::log(std::max(probs(r, y), kCceProbabilityFloor));
        break;
      case LossKind::kMae:
        for (Eigen::Index c = 0; c < probs.cols(); ++c) {
          loss += std::abs(probs(r, c) - (c == y ? 1.0 : 0.0));
        }
        break;
      case LossKind::kMse:
        for (Eigen::Index c = 0; c < probs.cols(); ++c) {
          const double d = probs(r, c) - (c == y ? 1.0 : 0.0);
          loss += d * d;
        }
        break;
    }
    losses[static_cast<std::size_t>(r)] = loss;
  }
  return losses;
}

std::vector<double> evaluate_losses(const ModelState& model, const Matrix& features,
                                    std::span<const int> labels, LossKind kind) {
  return loss_per_sample(forward(model, features), labels, kind);
}

std::vector<int> predict(const ModelState& model, const Matrix& features) {
  const Matrix probs = forward(model, features);
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    Eigen::Index best = 0;
    probs.row(r).maxCoeff(&best);
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

void Batch::validate(std::size_t num_classes) const {
  const auto n = static_cast<std::size_t>(features.rows());
  check_labels(labels, n, num_classes);
  if (weights.size() != n) throw InvalidInput("batch weights do not match batch size");
  if (!sample_ids.empty() && sample_ids.size() != n) {
    throw InvalidInput("batch sample ids do not match batch size");
  }
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidInput("batch weights must be non-negative");
  }
}

std::vector<double> grad_params_weighted(const ModelState& model, const Batch& batch,
                                         LossKind kind) {
  batch.validate(model.architecture.num_classes());
  const ForwardPass fp = run_forward(model, batch.features);
  return backward(model, fp, batch.labels, batch.weights, kind, true, false).params;
}

Matrix grad_input_batch(const ModelState& model, const Matrix& features,
                        std::span<const int> labels, LossKind kind) {
  check_labels(labels, static_cast<std::size_t>(features.rows()),
               model.architecture.num_classes());
  const ForwardPass fp = run_forward(model, features);
  const std::vector<double> ones(labels.size(), 1.0);
  return backward(model, fp, labels, ones, kind, false, true).inputs;
}

std::vector<double> grad_input(const ModelState& model, std::span<const double> x, int y,
                               LossKind kind) {
  const int labels[] = {y};
  const Matrix g = grad_input_batch(model, row_matrix(x), labels, kind);
  return {g.data(), g.data() + g.size()};
}

Matrix fgsm_perturb_batch(const ModelState& model, const Matrix& features,
                          std::span<const int> labels, double epsilon, LossKind kind) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw InvalidInput("epsilon must lie in [0, 1]");
  if (epsilon == 0.0) return features;
  const Matrix g = grad_input_batch(model, features, labels, kind);
  return features + epsilon * g.unaryExpr([](double v) { return sign(v); });
}

std::vector<double> fgsm_perturb(const ModelState& model, std::span<const double> x, int y,
                                 double epsilon, LossKind kind) {
  const int labels[] = {y};
  const Matrix out = fgsm_perturb_batch(model, row_matrix(x), labels, epsilon, kind);
  return {out.data(), out.data() + out.size()};
}

}  // namespace rrm
