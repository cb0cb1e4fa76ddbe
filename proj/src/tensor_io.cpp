#include "l2l/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace l2l {

namespace {

constexpr char kMagic[4] = {'L', '2', 'L', 'T'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Shape& shape, std::span<const double> values) {
  if (shape.size() > 255) throw Error(ErrorCode::TensorFormatError, "rank above 255");
  if (shape_numel(shape) != values.size()) throw Error(ErrorCode::ShapeMismatch, "encode_tensor");
  std::vector<std::uint8_t> out;
  out.reserve(6 + 4 * shape.size() + 8 * values.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(kTensorFormatVersion);
  out.push_back(static_cast<std::uint8_t>(shape.size()));
  for (std::size_t d : shape) {
    if (d > std::numeric_limits<std::uint32_t>::max()) throw Error(ErrorCode::TensorFormatError, "dim too large");
    put_u32(out, static_cast<std::uint32_t>(d));
  }
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes, const std::string& source) {
  auto fail = [&](const std::string& why) { return Error(ErrorCode::TensorFormatError, source + ": " + why); };
  if (bytes.size() < 6 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw fail("bad magic bytes");
  if (bytes[4] != kTensorFormatVersion) throw fail("unsupported version " + std::to_string(bytes[4]));
  const std::size_t rank = bytes[5];
  if (bytes.size() < 6 + 4 * rank) throw fail("truncated header");
  Shape shape(rank);
  for (std::size_t i = 0; i < rank; ++i) shape[i] = get_u32(bytes.data() + 6 + 4 * i);
  const std::size_t n = shape_numel(shape);
  const std::size_t offset = 6 + 4 * rank;
  if (bytes.size() != offset + 8 * n) {
    throw fail("payload holds " + std::to_string(bytes.size() - offset) + " bytes, expected " +
               std::to_string(8 * n));
  }
  std::vector<double> values(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::uint64_t bits = 0;
    const std::uint8_t* p = bytes.data() + offset + 8 * k;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    values[k] = std::bit_cast<double>(bits);
  }
  return Tensor::from(std::move(shape), std::move(values));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void write_tensor(const std::filesystem::path& path, const Tensor& tensor) {
  write_file_bytes(path, encode_tensor(tensor.shape(), tensor.data()));
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file_bytes(path);
  } catch (const Error&) {
    throw Error(ErrorCode::TensorFormatError, path.string() + ": cannot open");
  }
  return decode_tensor(bytes, path.string());
}

}  // namespace l2l
