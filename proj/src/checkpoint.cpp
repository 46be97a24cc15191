#include "fddb/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fddb/errors.hpp"
#include "fddb/image_io.hpp"

namespace fddb {

static_assert(std::endian::native == std::endian::little,
              "checkpoint arrays are stored in host order, which must be little-endian");

namespace {

constexpr char kMagic[8] = {'F', 'D', 'D', 'B', 'C', 'K', 'P', 'T'};
constexpr std::size_t kPrefix = sizeof(kMagic) + sizeof(std::uint64_t) + sizeof(std::uint32_t);

std::string dtype_name(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return "float32";
    case torch::kFloat64: return "float64";
    case torch::kInt64: return "int64";
    case torch::kUInt8: return "uint8";
    default: throw InvalidArgument("checkpoint arrays must be float32, float64, int64 or uint8");
  }
}

torch::ScalarType dtype_from_name(const std::string& name) {
  if (name == "float32") return torch::kFloat32;
  if (name == "float64") return torch::kFloat64;
  if (name == "int64") return torch::kInt64;
  if (name == "uint8") return torch::kUInt8;
  throw IntegrityError("checkpoint names unknown dtype '" + name + "'");
}

std::uint32_t crc32_of(const char* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(std::string_view bytes, std::size_t offset) {
  T v;
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  return v;
}

}  // namespace

const torch::Tensor& Checkpoint::array(std::string_view name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return a.tensor;
  }
  throw IntegrityError("checkpoint has no array '" + std::string(name) + "'");
}

bool Checkpoint::has_array(std::string_view name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return true;
  }
  return false;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string data;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& a : ckpt.arrays) {
    const auto t = a.tensor.detach().cpu().contiguous();
    const auto nbytes = static_cast<std::size_t>(t.numel()) * t.element_size();
    entries.push_back({{"name", a.name},
                       {"dtype", dtype_name(t.scalar_type())},
                       {"shape", t.sizes().vec()},
                       {"offset", data.size()},
                       {"nbytes", nbytes}});
    data.append(static_cast<const char*>(t.data_ptr()), nbytes);
  }
  nlohmann::json header = {{"format", "fddb-checkpoint"},
                           {"version", 1},
                           {"arrays", std::move(entries)},
                           {"data_bytes", data.size()},
                           {"data_crc32", crc32_of(data.data(), data.size())},
                           {"meta", ckpt.meta}};
  const std::string header_text = header.dump();

  std::string out;
  out.reserve(kPrefix + header_text.size() + data.size());
  out.append(kMagic, sizeof(kMagic));
  put<std::uint64_t>(out, header_text.size());
  put<std::uint32_t>(out, crc32_of(header_text.data(), header_text.size()));
  out += header_text;
  out += data;
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < kPrefix || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IntegrityError("not a checkpoint file (bad magic or truncated prefix)");
  }
  const auto header_len = get<std::uint64_t>(bytes, sizeof(kMagic));
  const auto header_crc = get<std::uint32_t>(bytes, sizeof(kMagic) + sizeof(std::uint64_t));
  if (header_len > bytes.size() - kPrefix) throw IntegrityError("checkpoint header is truncated");
  const auto header_text = bytes.substr(kPrefix, header_len);
  if (crc32_of(header_text.data(), header_text.size()) != header_crc) {
    throw IntegrityError("checkpoint header checksum mismatch");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_text);
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  const auto data = bytes.substr(kPrefix + header_len);
  try {
    if (data.size() != header.at("data_bytes").get<std::size_t>()) {
      throw IntegrityError("checkpoint array data is truncated");
    }
    if (crc32_of(data.data(), data.size()) != header.at("data_crc32").get<std::uint32_t>()) {
      throw IntegrityError("checkpoint array data checksum mismatch");
    }
    Checkpoint ckpt;
    ckpt.meta = header.at("meta");
    for (const auto& e : header.at("arrays")) {
      const auto dtype = dtype_from_name(e.at("dtype").get<std::string>());
      const auto shape = e.at("shape").get<std::vector<std::int64_t>>();
      const auto offset = e.at("offset").get<std::size_t>();
      const auto nbytes = e.at("nbytes").get<std::size_t>();
      if (offset > data.size() || nbytes > data.size() - offset) {
        throw IntegrityError("checkpoint array extends past the data section");
      }
      auto t = torch::empty(shape, torch::TensorOptions().dtype(dtype));
      if (static_cast<std::size_t>(t.numel()) * t.element_size() != nbytes) {
        throw IntegrityError("checkpoint array size does not match its shape");
      }
      std::memcpy(t.data_ptr(), data.data() + offset, nbytes);
      ckpt.arrays.push_back({e.at("name").get<std::string>(), std::move(t)});
    }
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("malformed checkpoint header: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace fddb
