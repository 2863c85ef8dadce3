#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "rrm/data.hpp"
#include "rrm/error.hpp"

namespace rrm {

std::vector<bool> Dataset::contaminated_mask() const {
  std::vector<bool> mask(size(), false);
  for (std::size_t i : contaminated) mask[i] = true;
  return mask;
}

void Dataset::validate() const {
  const std::size_t n = size();
  if (static_cast<std::size_t>(features.rows()) != n || observed_labels.size() != n) {
    throw InvalidInput("dataset arrays disagree on the sample count");
  }
  if (num_classes < 1) throw InvalidInput("dataset needs at least one class");
  for (std::size_t i = 0; i < n; ++i) {
    for (int y : {observed_labels[i], clean_labels[i]}) {
      if (y < 0 || y >= num_classes) {
        throw InvalidInput("label " + std::to_string(y) + " of sample " + std::to_string(i) +
                           " is out of range");
      }
    }
  }
  if (!std::is_sorted(contaminated.begin(), contaminated.end()) ||
      std::adjacent_find(contaminated.begin(), contaminated.end()) != contaminated.end()) {
    throw InvalidInput("contaminated set must be strictly ascending");
  }
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool listed = next < contaminated.size() && contaminated[next] == i;
    if (listed) ++next;
    if (listed != (observed_labels[i] != clean_labels[i])) {
      throw InvalidInput("sample " + std::to_string(i) +
                         (listed ? " is listed as contaminated but keeps its clean label"
                                 : " has a corrupted label but is not listed as contaminated"));
    }
  }
  if (next != contaminated.size()) throw InvalidInput("contaminated index out of range");
}

Dataset Dataset::clean(Matrix features, std::vector<int> labels, int num_classes) {
  Dataset d;
  d.features = std::move(features);
  d.observed_labels = labels;
  d.clean_labels = std::move(labels);
  d.num_classes = num_classes;
  d.validate();
  return d;
}

Dataset select(const Dataset& data, std::span<const std::size_t> indices) {
  Dataset out;
  out.num_classes = data.num_classes;
  out.contamination_rate = data.contamination_rate;
  out.contamination_seed = data.contamination_seed;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), data.features.cols());
  const std::vector<bool> mask = data.contaminated_mask();
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t src = indices[r];
    if (src >= data.size()) throw InvalidInput("selection index out of range");
    out.features.row(static_cast<Eigen::Index>(r)) =
        data.features.row(static_cast<Eigen::Index>(src));
    out.observed_labels.push_back(data.observed_labels[src]);
    out.clean_labels.push_back(data.clean_labels[src]);
    if (mask[src]) out.contaminated.push_back(r);
  }
  return out;
}

Dataset subset_classes(const Dataset& data, std::span<const int> keep) {
  if (keep.empty()) throw InvalidInput("class subset is empty");
  std::vector<int> remap(static_cast<std::size_t>(std::max(data.num_classes, 0)), -1);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const int c = keep[k];
    if (c < 0 || c >= data.num_classes) {
      throw InvalidInput("class " + std::to_string(c) + " is not present in the dataset");
    }
    if (remap[static_cast<std::size_t>(c)] != -1) throw InvalidInput("class subset has duplicates");
    remap[static_cast<std::size_t>(c)] = static_cast<int>(k);
  }

  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (remap[static_cast<std::size_t>(data.clean_labels[i])] >= 0) rows.push_back(i);
  }
  if (rows.empty()) throw InvalidInput("class subset selects no samples");

  Dataset out = select(data, rows);
  out.num_classes = static_cast<int>(keep.size());
  // An observed label outside the subset has no slot in the new label space.
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.clean_labels[i] = remap[static_cast<std::size_t>(out.clean_labels[i])];
    const int obs = remap[static_cast<std::size_t>(out.observed_labels[i])];
    if (obs < 0) {
      throw InvalidInput("sample with an observed label outside the subset; subset before contaminating");
    }
    out.observed_labels[i] = obs;
  }
  out.validate();
  return out;
}

Dataset make_synthetic_blobs(int num_classes, std::size_t samples_per_class,
                             std::size_t input_dim, double separation, std::uint64_t seed) {
  if (num_classes < 1 || samples_per_class == 0 || input_dim == 0) {
    throw InvalidInput("blob counts must be positive");
  }
  if (!(separation > 0.0)) throw InvalidInput("blob separation must be positive");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto k = static_cast<std::size_t>(num_classes);

  // Means at scaled basis vectors are exactly `separation` apart; with more
  // classes than dimensions fall back to random directions.
  Matrix means = Matrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(input_dim));
  const double radius = separation / std::sqrt(2.0);
  for (std::size_t c = 0; c < k; ++c) {
    if (k <= input_dim) {
      means(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c)) = radius;
    } else {
      auto row = means.row(static_cast<Eigen::Index>(c));
      for (Eigen::Index j = 0; j < row.size(); ++j) row(j) = gauss(rng);
      row *= radius / row.norm();
    }
  }

  const std::size_t n = k * samples_per_class;
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(input_dim));
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % k;
    labels[i] = static_cast<int>(c);
    for (std::size_t j = 0; j < input_dim; ++j) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          means(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) + gauss(rng);
    }
  }
  return Dataset::clean(std::move(x), std::move(labels), num_classes);
}

Splits split(const Dataset& data, std::array<double, 3> fractions, std::uint64_t seed) {
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw InvalidInput("split fractions must lie in [0, 1]");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InvalidInput("split fractions sum to " + std::to_string(total) + ", expected 1");
  }

  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_train = std::min(n, static_cast<std::size_t>(std::llround(fractions[0] * n)));
  const auto n_val =
      std::min(n - n_train, static_cast<std::size_t>(std::llround(fractions[1] * n)));
  // Whatever rounding leaves over goes to the last non-empty share.
  const std::size_t leftover = n - n_train - n_val;
  std::size_t n_train_adj = n_train;
  std::size_t n_val_adj = n_val;
  if (fractions[2] == 0.0 && leftover > 0) {
    if (fractions[1] > 0.0) n_val_adj += leftover;
    else n_train_adj += leftover;
  }

  Splits out;
  out.source_indices[0].assign(order.begin(), order.begin() + n_train_adj);
  out.source_indices[1].assign(order.begin() + n_train_adj,
                               order.begin() + n_train_adj + n_val_adj);
  out.source_indices[2].assign(order.begin() + n_train_adj + n_val_adj, order.end());
  out.train = select(data, out.source_indices[0]);
  out.validation = select(data, out.source_indices[1]);
  out.test = select(data, out.source_indices[2]);
  return out;
}

}  // namespace rrm
