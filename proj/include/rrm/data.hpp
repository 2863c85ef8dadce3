#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rrm/model.hpp"

namespace rrm {

/// Features with observed (possibly corrupted) and clean labels. The
/// contaminated set lists exactly the indices where the two disagree.
struct Dataset {
  Matrix features;  // samples x dim, values in [0, 1] for image data
  std::vector<int> observed_labels;
  std::vector<int> clean_labels;
  std::vector<std::size_t> contaminated;  // ascending
  int num_classes = 0;

  // Provenance of the contamination, kept for the cache header.
  double contamination_rate = 0.0;
  std::uint64_t contamination_seed = 0;

  std::size_t size() const { return clean_labels.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }

  /// Per-sample flag: true when sample i is in the contaminated set.
  std::vector<bool> contaminated_mask() const;

  /// Throws InvalidInput when dimensions disagree, a label is out of range,
  /// or the contaminated set does not match observed != clean.
  void validate() const;

  static Dataset clean(Matrix features, std::vector<int> labels, int num_classes);
};

/// Raw IDX image/label pair.
struct IdxData {
  Matrix features;  // bytes / 255
  std::vector<int> labels;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

/// Reads an IDX3 image file (magic 2051) and IDX1 label file (magic 2049).
IdxData load_idx(const std::string& images_path, const std::string& labels_path);

/// Writes features as bytes round(255 * x). Values must lie in [0, 1].
void write_idx(const std::string& images_path, const std::string& labels_path,
               const IdxData& data);

/// Keeps samples whose clean label is in `keep` and relabels them to the
/// position of that label within `keep`.
Dataset subset_classes(const Dataset& data, std::span<const int> keep);

/// Class-conditional transition matrix for non-uniform label corruption.
class ContaminationKernel {
 public:
  /// Rows must sum to 1 within 1e-3 and are renormalized exactly; entries
  /// must be in [0, 1] and the diagonal zero.
  explicit ContaminationKernel(std::vector<std::vector<double>> rows);

  /// Whitespace-separated K x K decimal matrix; '#' starts a comment.
  static ContaminationKernel load(const std::string& path);

  /// The 10-class MNIST confusion-derived kernel.
  static ContaminationKernel mnist10();

  std::size_t num_classes() const { return rows_.size(); }
  double probability(int from, int to) const;
  std::span<const double> row(int from) const;

 private:
  std::vector<std::vector<double>> rows_;
};

struct Contamination {
  std::vector<int> observed_labels;
  std::vector<std::size_t> contaminated;  // ascending
};

/// round(rate * N) indices chosen uniformly without replacement; each gets a
/// label drawn uniformly from the other classes.
Contamination inject_ncar(std::span<const int> labels, double rate, int num_classes,
                          std::uint64_t seed);

/// Same selection, but replacement labels come from the kernel row of the
/// true label.
Contamination inject_kernel(std::span<const int> labels, double rate,
                            const ContaminationKernel& kernel, std::uint64_t seed);

/// Installs a contamination onto a clean dataset.
Dataset apply_contamination(Dataset data, Contamination c, double rate, std::uint64_t seed);

/// number of selected samples: nearest integer to rate * n, halves rounded up.
std::size_t contamination_count(double rate, std::size_t n);

/// Isotropic unit-variance Gaussian clusters, one per class, with means
/// `separation` apart.
Dataset make_synthetic_blobs(int num_classes, std::size_t samples_per_class,
                             std::size_t input_dim, double separation, std::uint64_t seed);

struct Splits {
  Dataset train;
  Dataset validation;
  Dataset test;
  // Row i of each split came from source_indices[split][i].
  std::array<std::vector<std::size_t>, 3> source_indices;
};

/// Shuffled, disjoint, exhaustive three-way split. Fractions must be
/// non-negative and sum to 1.
Splits split(const Dataset& data, std::array<double, 3> fractions, std::uint64_t seed);

/// Rows `indices` of `data` with contamination bookkeeping carried along.
Dataset select(const Dataset& data, std::span<const std::size_t> indices);

/// Self-describing binary dataset container; see docs/formats.md.
void write_cache(const Dataset& data, const std::string& path);
Dataset read_cache(const std::string& path);

}  // namespace rrm
