#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

namespace fddb {

struct NamedArray {
  std::string name;
  torch::Tensor tensor;
};

/// In-memory checkpoint: JSON metadata plus named dense arrays.
struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedArray> arrays;

  const torch::Tensor& array(std::string_view name) const;
  bool has_array(std::string_view name) const;
};

// Container layout (all integers little-endian):
//   "FDDBCKPT" | u64 header_len | u32 crc32(header) | header JSON | array bytes
// The header lists every array's name, dtype, shape, byte offset and size,
// plus the crc32 of the array bytes and the metadata object. Arrays are raw
// IEEE-754 / two's-complement values in row-major order.
std::string serialize_checkpoint(const Checkpoint& ckpt);
/// Throws IntegrityError on truncation, bad magic or checksum mismatch.
Checkpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fddb
