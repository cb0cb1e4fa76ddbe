#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "l2l/tensor.hpp"

namespace l2l {

// L2LT binary layout, little-endian throughout:
//   "L2LT" | version u8 (=1) | rank u8 | dims u32[rank] | f64[numel] row-major
inline constexpr std::uint8_t kTensorFormatVersion = 1;

std::vector<std::uint8_t> encode_tensor(const Shape& shape, std::span<const double> values);
Tensor decode_tensor(std::span<const std::uint8_t> bytes, const std::string& source = "<memory>");

void write_tensor(const std::filesystem::path& path, const Tensor& tensor);
// TensorFormatError (naming the file) on bad magic, version, or length.
Tensor read_tensor(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace l2l
