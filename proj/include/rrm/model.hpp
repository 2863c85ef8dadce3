#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace rrm {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class LossKind { kCce, kMae, kMse };

enum class Activation { kRelu, kTanh };

std::string_view to_string(LossKind kind) noexcept;
std::string_view to_string(Activation act) noexcept;
LossKind parse_loss_kind(std::string_view name);
Activation parse_activation(std::string_view name);

/// Floor applied to p_y before taking the log in cross-entropy.
inline constexpr double kCceProbabilityFloor = 1e-12;

/// Dense feed-forward classifier: widths = {input, hidden..., classes}.
/// Hidden layers use `activation`, the output layer is softmax. With no hidden
/// widths this is a softmax-linear model.
struct Architecture {
  std::vector<std::size_t> widths;
  Activation activation = Activation::kRelu;
  bool bias = true;

  static Architecture softmax_linear(std::size_t input_dim, std::size_t num_classes);
  static Architecture mlp(std::size_t input_dim, std::vector<std::size_t> hidden,
                          std::size_t num_classes, Activation act = Activation::kRelu,
                          bool bias = true);
  /// 784 -> 320 -> 320 -> 200 -> 3 ReLU network without bias terms
  /// (417880 parameters).
  static Architecture mnist3();

  std::size_t input_dim() const { return widths.front(); }
  std::size_t num_classes() const { return widths.back(); }
  std::size_t num_layers() const { return widths.size() - 1; }
  std::size_t parameter_count() const;

  void validate() const;
  bool operator==(const Architecture&) const = default;
};

/// Where layer l lives inside the flat parameter vector. The weight block is
/// stored row-major with shape (out, in).
struct LayerSlice {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;  // meaningful only when the architecture has biases
};

std::vector<LayerSlice> make_layout(const Architecture& arch);

struct ModelState {
  Architecture architecture;
  std::vector<double> theta;
  std::vector<LayerSlice> layout;
  std::uint64_t seed = 0;

  /// Wraps an existing parameter vector, validating its length.
  static ModelState from_parameters(Architecture arch, std::vector<double> theta,
                                    std::uint64_t seed = 0);

  std::size_t parameter_count() const { return theta.size(); }
};

/// He-normal weights for ReLU layers (Glorot-normal for tanh), zero biases.
/// Deterministic in `seed`.
ModelState init_params(const Architecture& arch, std::uint64_t seed);

/// Rows of `features` are samples. Returns softmax probabilities (samples x classes).
Matrix forward(const ModelState& model, const Matrix& features);

std::vector<double> loss_per_sample(const Matrix& probs, std::span<const int> labels,
                                    LossKind kind);

/// Loss vector straight from features.
std::vector<double> evaluate_losses(const ModelState& model, const Matrix& features,
                                    std::span<const int> labels, LossKind kind);

std::vector<int> predict(const ModelState& model, const Matrix& features);

/// Samples handed to a gradient evaluation. weights[i] multiplies the gradient
/// of sample i; sample_ids map rows back to the full training set.
struct Batch {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::size_t> sample_ids;
  std::vector<double> weights;

  std::size_t size() const { return labels.size(); }
  void validate(std::size_t num_classes) const;
};

/// sum_i weights[i] * d J(theta; x_i, y_i) / d theta.
std::vector<double> grad_params_weighted(const ModelState& model, const Batch& batch,
                                         LossKind kind);

/// d J(theta; x, y) / d x for a single sample.
std::vector<double> grad_input(const ModelState& model, std::span<const double> x, int y,
                               LossKind kind);

/// Row-wise input gradients for a whole matrix of samples.
Matrix grad_input_batch(const ModelState& model, const Matrix& features,
                        std::span<const int> labels, LossKind kind);

/// x + epsilon * sign(grad_x J) with sign(0) = 0. No clipping.
std::vector<double> fgsm_perturb(const ModelState& model, std::span<const double> x, int y,
                                 double epsilon, LossKind kind);

Matrix fgsm_perturb_batch(const ModelState& model, const Matrix& features,
                          std::span<const int> labels, double epsilon, LossKind kind);

/// Binary checkpoint; see docs/formats.md for the layout.
void save_checkpoint(const ModelState& model, const std::string& path);
ModelState load_checkpoint(const std::string& path);

}  // namespace rrm
