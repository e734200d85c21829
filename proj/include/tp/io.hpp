#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tp/image.hpp"

// On-disk formats: PNG images, "TPDM" float depth maps, "TPCK" checkpoints
// (versioned named-tensor store with a bit-exact round trip), and SHA-256
// hashing for immutability checks.

namespace tp {

// PNG, 8-bit; c == 1 or c == 3. Values clamped to [0,1] on write.
void write_png(const std::string& path, const Image& img);
Image read_png(const std::string& path);

// Depth maps: magic "TPDM", u32 width/height/reserved, then row-major
// little-endian f32 in scene units.
void write_tpdm(const std::string& path, const Image& depth);  // c == 1
Image read_tpdm(const std::string& path);

// Checkpoints: magic "TPCK", u32 version, u64 step, config echo string,
// then length-prefixed named f32 tensors in insertion order.
struct Checkpoint {
  std::uint64_t step = 0;
  std::string config_echo;
  std::vector<std::pair<std::string, std::pair<std::vector<int>, std::vector<float>>>> tensors;

  void put(const std::string& name, std::vector<int> shape, std::vector<float> data);
  const std::pair<std::vector<int>, std::vector<float>>& get(const std::string& name) const;
  bool has(const std::string& name) const;
};

void write_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint read_checkpoint(const std::string& path);

std::string sha256_hex(const void* data, std::size_t n);
std::string sha256_file(const std::string& path);

}  // namespace tp
