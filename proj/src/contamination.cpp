#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "rrm/data.hpp"
#include "rrm/error.hpp"

namespace rrm {

namespace {

constexpr double kRowSumTol = 1e-3;

void require_rate(double rate) {
  if (!(rate >= 0.0 && rate <= 1.0)) {
    throw InvalidInput("contamination rate must lie in [0, 1], got " + std::to_string(rate));
  }
}

// Uniform selection without replacement via a partial Fisher-Yates pass.
std::vector<std::size_t> pick_indices(std::size_t n, std::size_t count, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

std::size_t contamination_count(double rate, std::size_t n) {
  require_rate(rate);
  return std::min(n, static_cast<std::size_t>(std::floor(rate * static_cast<double>(n) + 0.5)));
}

ContaminationKernel::ContaminationKernel(std::vector<std::vector<double>> rows)
    : rows_(std::move(rows)) {
  const std::size_t k = rows_.size();
  if (k < 2) throw InvalidInput("contamination kernel needs at least two classes");
  for (std::size_t r = 0; r < k; ++r) {
    auto& row = rows_[r];
    if (row.size() != k) {
      throw InvalidInput("kernel row " + std::to_string(r) + " has " + std::to_string(row.size()) +
                         " entries, expected " + std::to_string(k));
    }
    double sum = 0.0;
    for (double v : row) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw InvalidInput("kernel row " + std::to_string(r) + " has an entry outside [0, 1]");
      }
      sum += v;
    }
    if (row[r] != 0.0) throw InvalidInput("kernel diagonal entry " + std::to_string(r) + " is not 0");
    if (std::abs(sum - 1.0) > kRowSumTol) {
      throw InvalidInput("kernel row " + std::to_string(r) + " sums to " + std::to_string(sum));
    }
    for (double& v : row) v /= sum;
  }
}

ContaminationKernel ContaminationKernel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open kernel file " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::vector<double> row;
    std::string token;
    while (fields >> token) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(token, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != token.size()) {
        throw FormatError(path + ":" + std::to_string(line_no) + ": '" + token +
                          "' is not a number");
      }
      row.push_back(v);
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError(path + ": kernel file has no rows");
  try {
    return ContaminationKernel(std::move(rows));
  } catch (const InvalidInput& e) {
    throw FormatError(path + ": " + e.what());
  }
}

ContaminationKernel ContaminationKernel::mnist10() {
  return ContaminationKernel({
      {0, 0.0769, 0.0769, 0.1538, 0, 0.0769, 0.3846, 0, 0.1538, 0.0769},
      {0, 0, 0.3333, 0.1111, 0, 0.1111, 0.1111, 0, 0.3333, 0},
      {0.0968, 0.0645, 0, 0.2581, 0.0323, 0, 0.0968, 0.1935, 0.2581, 0},
      {0, 0, 0.1250, 0, 0, 0.1250, 0, 0.1250, 0.6250, 0},
      {0.1111, 0.0370, 0.0741, 0.0741, 0, 0.0741, 0.2222, 0.0370, 0.1111, 0.2593},
      {0.0508, 0.0169, 0, 0.6271, 0.0169, 0, 0.1525, 0, 0.1017, 0.0339},
      {0.2353, 0.1765, 0.0588, 0.0588, 0.0588, 0.1765, 0, 0, 0.2353, 0},
      {0.0500, 0.2250, 0.2000, 0.1250, 0, 0, 0, 0, 0.2000, 0.2000},
      {0.1071, 0.0357, 0.1071, 0.3571, 0.1071, 0.0714, 0.0714, 0.1071, 0, 0.0357},
      {0.0638, 0.1702, 0, 0.2128, 0.1702, 0.1702, 0.0213, 0.0851, 0.1064, 0},
  });
}

double ContaminationKernel::probability(int from, int to) const {
  return row(from)[static_cast<std::size_t>(to)];
}

std::span<const double> ContaminationKernel::row(int from) const {
  if (from < 0 || static_cast<std::size_t>(from) >= rows_.size()) {
    throw InvalidInput("class " + std::to_string(from) + " outside the kernel");
  }
  return rows_[static_cast<std::size_t>(from)];
}

Contamination inject_ncar(std::span<const int> labels, double rate, int num_classes,
                          std::uint64_t seed) {
  require_rate(rate);
  const std::size_t count = contamination_count(rate, labels.size());
  if (count > 0 && num_classes < 2) {
    throw InvalidInput("label contamination needs at least two classes");
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw InvalidInput("label out of range for NCAR injection");
  }

  std::mt19937_64 rng(seed);
  Contamination out;
  out.observed_labels.assign(labels.begin(), labels.end());
  out.contaminated = pick_indices(labels.size(), count, rng);
  std::uniform_int_distribution<int> other(0, std::max(num_classes - 2, 0));
  for (std::size_t i : out.contaminated) {
    const int draw = other(rng);
    out.observed_labels[i] = draw < labels[i] ? draw : draw + 1;
  }
  return out;
}

Contamination inject_kernel(std::span<const int> labels, double rate,
                            const ContaminationKernel& kernel, std::uint64_t seed) {
  require_rate(rate);
  const auto k = static_cast<int>(kernel.num_classes());
  for (int y : labels) {
    if (y < 0 || y >= k) throw InvalidInput("label out of range for the contamination kernel");
  }
  std::mt19937_64 rng(seed);
  Contamination out;
  out.observed_labels.assign(labels.begin(), labels.end());
  out.contaminated = pick_indices(labels.size(), contamination_count(rate, labels.size()), rng);

  std::vector<std::discrete_distribution<int>> rows;
  for (int c = 0; c < k; ++c) {
    const auto r = kernel.row(c);
    rows.emplace_back(r.begin(), r.end());
  }
  for (std::size_t i : out.contaminated) {
    out.observed_labels[i] = rows[static_cast<std::size_t>(labels[i])](rng);
  }
  return out;
}

Dataset apply_contamination(Dataset data, Contamination c, double rate, std::uint64_t seed) {
  if (c.observed_labels.size() != data.size()) {
    throw InvalidInput("contamination does not match the dataset size");
  }
  data.observed_labels = std::move(c.observed_labels);
  data.contaminated = std::move(c.contaminated);
  data.contamination_rate = rate;
  data.contamination_seed = seed;
  data.validate();
  return data;
}

}  // namespace rrm
