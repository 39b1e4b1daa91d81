#include "orl/nn/checkpoint.hpp"

#include <fstream>
#include <limits>

#include "orl/binary_io.hpp"
#include "orl/errors.hpp"

namespace orl::nn {

namespace {

void write_layer_values(std::ostream& os, const Layer& l) {
  for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
    for (Eigen::Index c = 0; c < l.weight.cols(); ++c) io::write_le<double>(os, l.weight(r, c));
  for (Eigen::Index r = 0; r < l.bias.size(); ++r) io::write_le<double>(os, l.bias(r));
}

Layer read_layer_values(std::istream& is, Eigen::Index rows, Eigen::Index cols) {
  Layer l{Matrix(rows, cols), Vector(rows)};
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) l.weight(r, c) = io::read_le<double>(is);
  for (Eigen::Index r = 0; r < rows; ++r) l.bias(r) = io::read_le<double>(is);
  return l;
}

}  // namespace

void write_checkpoint(std::ostream& os, const NetParams& params) {
  if (params.layers.size() > std::numeric_limits<std::uint16_t>::max())
    throw ConfigError("write_checkpoint: too many layers");
  if (params.adam.first.size() != params.layers.size() ||
      params.adam.second.size() != params.layers.size())
    throw ConfigError("write_checkpoint: Adam state does not match layers");
  io::write_magic(os, "ONNP");
  io::write_le<std::uint16_t>(os, kCheckpointVersion);
  io::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(params.layers.size()));
  for (const auto& l : params.layers) {
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(l.weight.rows()));
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(l.weight.cols()));
    write_layer_values(os, l);
  }
  io::write_le<std::uint64_t>(os, params.adam.step);
  for (const auto& l : params.adam.first) write_layer_values(os, l);
  for (const auto& l : params.adam.second) write_layer_values(os, l);
  if (!os) throw FormatError("write_checkpoint: stream write failed");
}

NetParams read_checkpoint(std::istream& is) {
  io::expect_magic(is, "ONNP");
  const auto version = io::read_le<std::uint16_t>(is);
  if (version != kCheckpointVersion)
    throw FormatError("read_checkpoint: unsupported version " + std::to_string(version));
  const auto count = io::read_le<std::uint16_t>(is);
  NetParams p;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes;
  for (std::uint16_t i = 0; i < count; ++i) {
    const auto rows = static_cast<Eigen::Index>(io::read_le<std::uint32_t>(is));
    const auto cols = static_cast<Eigen::Index>(io::read_le<std::uint32_t>(is));
    if (!shapes.empty() && shapes.back().first != cols)
      throw FormatError("read_checkpoint: incompatible consecutive layer dims");
    shapes.emplace_back(rows, cols);
    p.layers.push_back(read_layer_values(is, rows, cols));
  }
  p.adam.step = io::read_le<std::uint64_t>(is);
  for (const auto& [r, c] : shapes) p.adam.first.push_back(read_layer_values(is, r, c));
  for (const auto& [r, c] : shapes) p.adam.second.push_back(read_layer_values(is, r, c));
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const NetParams& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  write_checkpoint(os, params);
}

NetParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  return read_checkpoint(is);
}

}  // namespace orl::nn
