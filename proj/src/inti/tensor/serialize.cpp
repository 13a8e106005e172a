#include "inti/tensor/serialize.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace inti {

namespace {

template <typename T>
void put_le(std::ostream& os, T value) {
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T)))
    throw IoError("truncated tensor stream");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
  os.write("INTI", 4);
  put_le<std::uint32_t>(os, kTensorFormatVersion);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  for (double v : t.data()) put_le<double>(os, v);
  if (!os) throw IoError("failed writing tensor");
}

Tensor read_tensor(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "INTI", 4) != 0)
    throw IoError("bad tensor magic");
  const auto version = get_le<std::uint32_t>(is);
  if (version != kTensorFormatVersion)
    throw IoError("unsupported tensor format version " + std::to_string(version));
  const auto rank = get_le<std::uint32_t>(is);
  if (rank == 0 || rank > 16) throw IoError("bad tensor rank " + std::to_string(rank));
  Shape shape(rank);
  for (auto& d : shape) {
    d = get_le<std::uint32_t>(is);
    if (d == 0) throw IoError("zero tensor dimension");
  }
  std::vector<double> data(shape_numel(shape));
  for (auto& v : data) v = get_le<double>(is);
  return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_tensor(os, t);
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_tensor(is);
}

}  // namespace inti
