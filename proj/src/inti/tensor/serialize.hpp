#pragma once

#include <filesystem>
#include <iosfwd>

#include "inti/tensor/tensor.hpp"

namespace inti {

// Binary layout, all integers and floats little-endian:
//   "INTI" | u32 version | u32 rank | u32 dims[rank] | f64 data[numel]
inline constexpr std::uint32_t kTensorFormatVersion = 1;

void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace inti
