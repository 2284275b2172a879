// Copyright 2026 the lapt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "lapt/common.hpp"
#include "lapt/tensor.hpp"

namespace lapt {

// Portable tensor file:
//   bytes 0-3  magic "TNSR"
//   byte  4    format version (1)
//   byte  5    dtype code (1 = IEEE-754 float32 little-endian)
//   byte  6    rank, 1..4
//   byte  7    reserved (0)
//   then rank x u32 little-endian dims, then row-major payload.
namespace tnsr {

inline constexpr char kMagic[4] = {'T', 'N', 'S', 'R'};
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 1;

inline void put_u32_le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace tnsr

inline std::string tensor_to_bytes(const Tensor<float>& t) {
  require(t.rank() >= 1 && t.rank() <= 4, "tensor file rank must be in [1, 4], got ", t.rank());
  std::string out;
  out.reserve(8 + 4 * static_cast<std::size_t>(t.rank()) + 4 * t.size());
  out.append(tnsr::kMagic, 4);
  out.push_back(static_cast<char>(tnsr::kVersion));
  out.push_back(static_cast<char>(tnsr::kDtypeF32));
  out.push_back(static_cast<char>(t.rank()));
  out.push_back(0);
  for (int i = 0; i < t.rank(); ++i) tnsr::put_u32_le(out, static_cast<std::uint32_t>(t.dim(i)));
  if constexpr (std::endian::native == std::endian::little) {
    out.append(reinterpret_cast<const char*>(t.data()), 4 * t.size());
  } else {
    for (std::size_t i = 0; i < t.size(); ++i)
      tnsr::put_u32_le(out, std::bit_cast<std::uint32_t>(t[i]));
  }
  return out;
}

inline Tensor<float> tensor_from_bytes(std::string_view bytes, const std::string& origin = "tensor") {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  require<FormatError>(bytes.size() >= 8, origin, ": header truncated, expected at least 8 bytes, got ",
                       bytes.size());
  require<FormatError>(std::memcmp(p, tnsr::kMagic, 4) == 0, origin,
                       ": bad magic at offset 0, expected \"TNSR\"");
  require<FormatError>(p[4] == tnsr::kVersion, origin, ": unsupported version ", int(p[4]),
                       " at offset 4, expected ", int(tnsr::kVersion));
  require<FormatError>(p[5] == tnsr::kDtypeF32, origin, ": unsupported dtype code ", int(p[5]),
                       " at offset 5, expected ", int(tnsr::kDtypeF32), " (float32)");
  const int rank = p[6];
  require<FormatError>(rank >= 1 && rank <= 4, origin, ": bad rank ", rank,
                       " at offset 6, expected 1..4");
  require<FormatError>(p[7] == 0, origin, ": reserved byte at offset 7 must be 0, got ", int(p[7]));
  std::size_t header = 8 + 4 * static_cast<std::size_t>(rank);
  require<FormatError>(bytes.size() >= header, origin, ": dims truncated, expected ", header,
                       " header bytes, got ", bytes.size());
  std::vector<int> shape(static_cast<std::size_t>(rank));
  std::size_t count = 1;
  for (int i = 0; i < rank; ++i) {
    std::uint32_t d = tnsr::get_u32_le(p + 8 + 4 * i);
    require<FormatError>(d > 0, origin, ": dimension ", i, " is zero");
    shape[static_cast<std::size_t>(i)] = static_cast<int>(d);
    count *= d;
  }
  std::size_t expected = header + 4 * count;
  require<FormatError>(bytes.size() == expected, origin, ": payload size mismatch, expected ",
                       expected, " bytes, got ", bytes.size());
  Tensor<float> t(shape);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(t.data(), p + header, 4 * count);
  } else {
    for (std::size_t i = 0; i < count; ++i)
      t[i] = std::bit_cast<float>(tnsr::get_u32_le(p + header + 4 * i));
  }
  return t;
}

inline void write_tensor(const std::filesystem::path& path, const Tensor<float>& t) {
  std::string bytes = tensor_to_bytes(t);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require<IoError>(f.good(), "cannot open for writing: ", path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require<IoError>(f.good(), "write failed: ", path.string());
}

inline Tensor<float> read_tensor(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  require<IoError>(f.good(), "cannot open for reading: ", path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return tensor_from_bytes(bytes, path.string());
}

}  // namespace lapt
