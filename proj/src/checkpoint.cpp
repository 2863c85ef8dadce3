#include <array>
#include <fstream>

#include "rrm/binary_io.hpp"
#include "rrm/model.hpp"

namespace rrm {

namespace {
constexpr std::array<char, 8> kMagic = {'R', 'R', 'M', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const ModelState& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  const Architecture& arch = model.architecture;
  out.write(kMagic.data(), kMagic.size());
  binary::write_le<std::uint32_t>(out, kVersion);
  binary::write_le<std::uint32_t>(out, arch.activation == Activation::kRelu ? 0 : 1);
  binary::write_le<std::uint32_t>(out, arch.bias ? 1 : 0);
  binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(arch.widths.size()));
  for (std::size_t w : arch.widths) binary::write_le<std::uint64_t>(out, w);
  binary::write_le<std::uint64_t>(out, model.seed);
  binary::write_le<std::uint64_t>(out, model.theta.size());
  for (double v : model.theta) binary::write_le<double>(out, v);
  if (!out) throw IoError("failed while writing checkpoint: " + path);
}

ModelState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw FormatError("bad checkpoint magic in " + path);
  const auto version = binary::read_le<std::uint32_t>(in, "version");
  if (version != kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Architecture arch;
  const auto act = binary::read_le<std::uint32_t>(in, "activation");
  if (act > 1) throw FormatError("unknown activation code " + std::to_string(act));
  arch.activation = act == 0 ? Activation::kRelu : Activation::kTanh;
  arch.bias = binary::read_le<std::uint32_t>(in, "bias flag") != 0;
  const auto depth = binary::read_le<std::uint32_t>(in, "layer count");
  if (depth < 2 || depth > 64) throw FormatError("implausible layer count " + std::to_string(depth));
  for (std::uint32_t i = 0; i < depth; ++i) {
    arch.widths.push_back(static_cast<std::size_t>(binary::read_le<std::uint64_t>(in, "width")));
  }
  const auto seed = binary::read_le<std::uint64_t>(in, "seed");
  const auto count = binary::read_le<std::uint64_t>(in, "parameter count");
  if (count != arch.parameter_count()) {
    throw FormatError("parameter count " + std::to_string(count) + " does not match architecture");
  }
  std::vector<double> theta(count);
  for (auto& v : theta) v = binary::read_le<double>(in, "parameters");
  return ModelState::from_parameters(std::move(arch), std::move(theta), seed);
}

}  // namespace rrm
