#include <array>
#include <fstream>

#include "rrm/binary_io.hpp"
#include "rrm/data.hpp"

namespace rrm {

namespace {
constexpr std::array<char, 8> kMagic = {'R', 'R', 'M', 'D', 'S', 'E', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void write_cache(const Dataset& data, const std::string& path) {
  data.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open dataset cache for writing: " + path);
  const std::size_t n = data.size();
  out.write(kMagic.data(), kMagic.size());
  binary::write_le<std::uint32_t>(out, kVersion);
  binary::write_le<std::uint64_t>(out, n);
  binary::write_le<std::uint64_t>(out, data.dim());
  binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.num_classes));
  binary::write_le<std::uint64_t>(out, data.contamination_seed);
  binary::write_le<double>(out, data.contamination_rate);
  for (Eigen::Index i = 0; i < data.features.size(); ++i) {
    binary::write_le<double>(out, data.features.data()[i]);
  }
  for (int y : data.clean_labels) binary::write_le<std::int32_t>(out, y);
  for (int y : data.observed_labels) binary::write_le<std::int32_t>(out, y);
  std::vector<char> bitmap((n + 7) / 8, 0);
  for (std::size_t i : data.contaminated) bitmap[i / 8] |= static_cast<char>(1u << (i % 8));
  out.write(bitmap.data(), static_cast<std::streamsize>(bitmap.size()));
  if (!out) throw IoError("failed while writing dataset cache: " + path);
}

Dataset read_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset cache: " + path);
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw FormatError(path + ": not a dataset cache (bad magic)");
  const auto version = binary::read_le<std::uint32_t>(in, "version");
  if (version != kVersion) {
    throw FormatError(path + ": unsupported cache version " + std::to_string(version));
  }
  const auto n = binary::read_le<std::uint64_t>(in, "sample count");
  const auto dim = binary::read_le<std::uint64_t>(in, "feature dimension");
  Dataset d;
  d.num_classes = static_cast<int>(binary::read_le<std::uint32_t>(in, "class count"));
  d.contamination_seed = binary::read_le<std::uint64_t>(in, "seed");
  d.contamination_rate = binary::read_le<double>(in, "rate");

  d.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < d.features.size(); ++i) {
    d.features.data()[i] = binary::read_le<double>(in, "features");
  }
  d.clean_labels.resize(n);
  for (auto& y : d.clean_labels) y = binary::read_le<std::int32_t>(in, "clean labels");
  d.observed_labels.resize(n);
  for (auto& y : d.observed_labels) y = binary::read_le<std::int32_t>(in, "observed labels");
  std::vector<char> bitmap((n + 7) / 8);
  in.read(bitmap.data(), static_cast<std::streamsize>(bitmap.size()));
  if (!in) throw FormatError(path + ": truncated file while reading contamination bitmap");
  for (std::size_t i = 0; i < n; ++i) {
    if (static_cast<unsigned char>(bitmap[i / 8]) & (1u << (i % 8))) d.contaminated.push_back(i);
  }
  try {
    d.validate();
  } catch (const InvalidInput& e) {
    throw FormatError(path + ": inconsistent dataset cache: " + e.what());
  }
  return d;
}

}  // namespace rrm
