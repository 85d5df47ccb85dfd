#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "voxflow/errors.hpp"
#include "voxflow/numerics/tensor.hpp"

// TensorFile layout (little-endian, no padding):
//   magic   4 bytes  "FSX1"
//   dtype   u8       0 = float32
//   ndim    u8
//   dims    ndim x u64
//   payload product(dims) x float32, row-major

namespace voxflow::store {

inline constexpr std::array<char, 4> kTensorMagic{'F', 'S', 'X', '1'};
inline constexpr std::uint8_t kDtypeFloat32 = 0;

static_assert(std::endian::native == std::endian::little,
              "TensorFile IO assumes a little-endian host");

namespace detail {

inline void put_u64(std::vector<char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline std::vector<char> encode_tensor(const Tensor& t) {
  if (t.rank() > 255) throw FormatError("tensor rank exceeds 255");
  std::vector<char> out(kTensorMagic.begin(), kTensorMagic.end());
  out.push_back(static_cast<char>(kDtypeFloat32));
  out.push_back(static_cast<char>(t.rank()));
  for (auto d : t.dims()) detail::put_u64(out, d);
  const std::size_t offset = out.size();
  out.resize(offset + 4 * t.size());
  std::memcpy(out.data() + offset, t.data().data(), 4 * t.size());
  return out;
}

inline Tensor decode_tensor(const std::vector<char>& bytes, const std::string& origin = "<memory>") {
  auto fail = [&](const std::string& what) {
    return FormatError(origin + ": " + what);
  };
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 6) throw fail("truncated header");
  if (std::memcmp(bytes.data(), kTensorMagic.data(), 4) != 0) throw fail("bad magic");
  if (p[4] != kDtypeFloat32) throw fail("unsupported dtype " + std::to_string(p[4]));
  const std::size_t ndim = p[5];
  if (ndim == 0) throw fail("ndim must be positive");
  if (bytes.size() < 6 + 8 * ndim) throw fail("truncated dims");
  Dims dims(ndim);
  std::size_t count = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    const std::uint64_t d = detail::get_u64(p + 6 + 8 * i);
    if (d == 0) throw fail("zero-sized dim " + std::to_string(i));
    dims[i] = static_cast<std::size_t>(d);
    count *= dims[i];
  }
  const std::size_t offset = 6 + 8 * ndim;
  if (bytes.size() - offset < 4 * count) throw fail("truncated payload");
  if (bytes.size() - offset > 4 * count) throw fail("trailing bytes after payload");
  std::vector<float> data(count);
  std::memcpy(data.data(), bytes.data() + offset, 4 * count);
  return Tensor(std::move(dims), std::move(data));
}

inline void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  const auto bytes = encode_tensor(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

inline Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open tensor file: " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_tensor(bytes, path.string());
}

}  // namespace voxflow::store
