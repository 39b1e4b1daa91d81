#pragma once

#include <filesystem>
#include <iosfwd>

#include "orl/nn/mlp.hpp"

namespace orl::nn {

// "ONNP" parameter file, little-endian:
//   magic[4] | version u16 | layer count u16
//   per layer: rows u32 | cols u32 | weights f64[rows*cols] (row-major) | biases f64[rows]
//   Adam state: step u64, then per layer first-moment weights/biases, then per
//   layer second-moment weights/biases (same shapes as above)
inline constexpr std::uint16_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& os, const NetParams& params);
NetParams read_checkpoint(std::istream& is);

void save_checkpoint(const std::filesystem::path& path, const NetParams& params);
NetParams load_checkpoint(const std::filesystem::path& path);

}  // namespace orl::nn
