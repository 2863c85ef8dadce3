#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "rrm/data.hpp"
#include "rrm/error.hpp"

namespace rrm {

namespace {

constexpr std::uint32_t kImageMagic = 2051;
constexpr std::uint32_t kLabelMagic = 2049;

std::vector<unsigned char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::string& path, const char* field) {
  if (bytes.size() < offset + 4) {
    throw FormatError(path + ": truncated file while reading " + field);
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

}  // namespace

IdxData load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto img = slurp(images_path);
  const auto lab = slurp(labels_path);

  const auto img_magic = read_be32(img, 0, images_path, "magic");
  if (img_magic != kImageMagic) {
    throw FormatError(images_path + ": bad magic " + std::to_string(img_magic) + " (expected 2051)");
  }
  const auto count = read_be32(img, 4, images_path, "image count");
  const auto rows = read_be32(img, 8, images_path, "row count");
  const auto cols = read_be32(img, 12, images_path, "column count");

  const auto lab_magic = read_be32(lab, 0, labels_path, "magic");
  if (lab_magic != kLabelMagic) {
    throw FormatError(labels_path + ": bad magic " + std::to_string(lab_magic) + " (expected 2049)");
  }
  const auto label_count = read_be32(lab, 4, labels_path, "label count");
  if (label_count != count) {
    throw FormatError("label count " + std::to_string(label_count) + " in " + labels_path +
                      " does not match image count " + std::to_string(count) + " in " +
                      images_path);
  }

  const std::size_t dim = std::size_t{rows} * cols;
  if (img.size() < 16 + std::size_t{count} * dim) {
    throw FormatError(images_path + ": truncated file while reading pixel data");
  }
  if (lab.size() < 8 + std::size_t{count}) {
    throw FormatError(labels_path + ": truncated file while reading labels");
  }

  IdxData out;
  out.rows = rows;
  out.cols = cols;
  out.features.resize(count, static_cast<Eigen::Index>(dim));
  const unsigned char* px = img.data() + 16;
  for (std::size_t i = 0; i < std::size_t{count} * dim; ++i) {
    out.features.data()[i] = static_cast<double>(px[i]) / 255.0;
  }
  out.labels.assign(lab.begin() + 8, lab.begin() + 8 + count);
  return out;
}

void write_idx(const std::string& images_path, const std::string& labels_path,
               const IdxData& data) {
  const auto n = static_cast<std::size_t>(data.features.rows());
  const auto dim = static_cast<std::size_t>(data.features.cols());
  if (data.labels.size() != n) throw InvalidInput("label count does not match feature rows");
  if (data.rows * data.cols != dim) throw InvalidInput("image shape does not match feature width");

  std::ofstream img(images_path, std::ios::binary | std::ios::trunc);
  if (!img) throw IoError("cannot open " + images_path + " for writing");
  write_be32(img, kImageMagic);
  write_be32(img, static_cast<std::uint32_t>(n));
  write_be32(img, static_cast<std::uint32_t>(data.rows));
  write_be32(img, static_cast<std::uint32_t>(data.cols));
  std::vector<char> px(n * dim);
  for (std::size_t i = 0; i < px.size(); ++i) {
    const double v = data.features.data()[i];
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidInput("IDX pixel values must lie in [0, 1]");
    px[i] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
  }
  img.write(px.data(), static_cast<std::streamsize>(px.size()));
  if (!img) throw IoError("failed while writing " + images_path);

  std::ofstream lab(labels_path, std::ios::binary | std::ios::trunc);
  if (!lab) throw IoError("cannot open " + labels_path + " for writing");
  write_be32(lab, kLabelMagic);
  write_be32(lab, static_cast<std::uint32_t>(n));
  for (int y : data.labels) {
    if (y < 0 || y > 255) throw InvalidInput("IDX labels must fit in one byte");
    lab.put(static_cast<char>(y));
  }
  if (!lab) throw IoError("failed while writing " + labels_path);
}

}  // namespace rrm
