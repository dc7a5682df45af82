#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "berry/qnet.hpp"

namespace berry {

// Binary checkpoint layout (all integers and floats little-endian):
//
//   offset  size  field
//   0       8     magic "BERRYQN\0"
//   8       4     u32 format version (currently 1)
//   12      4     u32 width count L+1
//   16      4*(L+1) u32 widths: input, hidden..., output
//   ...     8     u64 init seed
//   ...     8     u64 training step
//   then for each of the L layers: out*in f32 weights (row-major), out f32 biases
//
// Reading checks magic, version, and that the file ends exactly after the
// last bias.
struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  QNetwork net;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;

  bool operator==(const Checkpoint&) const = default;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace berry
