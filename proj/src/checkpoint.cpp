#include "adnet/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "adnet/errors.hpp"

namespace adnet {
namespace {

constexpr char kMagic[8] = {'A', 'D', 'N', 'E', 'T', 'C', 'K', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_le(std::ostream& os, T v) {
  static_assert(std::is_integral_v<T>);
  std::array<char, sizeof(T)> buf;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    buf[i] = static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF);
  os.write(buf.data(), buf.size());
}

template <typename T>
T read_le(std::istream& is) {
  std::array<char, sizeof(T)> buf;
  is.read(buf.data(), buf.size());
  if (!is) throw CheckpointError("checkpoint: truncated stream");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  return static_cast<T>(v);
}

void write_f64(std::ostream& os, double d) {
  write_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(d));
}

double read_f64(std::istream& is) {
  return std::bit_cast<double>(read_le<std::uint64_t>(is));
}

}  // namespace

void write_tensor_blob(std::ostream& os, const NamedTensors& tensors) {
  os.write(kMagic, sizeof(kMagic));
  write_le<std::uint32_t>(os, kVersion);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max())
      throw CheckpointError("checkpoint: tensor name too long: " + name);
    write_le<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_le<std::uint8_t>(os, static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape) write_le<std::uint64_t>(os, d);
    for (double v : t.values) write_f64(os, v);
  }
  if (!os) throw StorageError("checkpoint: write failed");
}

NamedTensors read_tensor_blob(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError("checkpoint: bad magic");
  const auto version = read_le<std::uint32_t>(is);
  if (version != kVersion)
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  const auto count = read_le<std::uint32_t>(is);
  NamedTensors out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_le<std::uint16_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const auto rank = read_le<std::uint8_t>(is);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(read_le<std::uint64_t>(is));
    std::vector<double> values(shape_numel(shape));
    for (auto& v : values) v = read_f64(is);
    if (!is) throw CheckpointError("checkpoint: truncated tensor " + name);
    out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return out;
}

void write_tensor_file(const std::string& path, const NamedTensors& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw StorageError("checkpoint: cannot open for write: " + path);
  write_tensor_blob(os, tensors);
}

NamedTensors read_tensor_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw StorageError("checkpoint: cannot open: " + path);
  return read_tensor_blob(is);
}

const Tensor* find_tensor(const NamedTensors& tensors, const std::string& name) {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

}  // namespace adnet
