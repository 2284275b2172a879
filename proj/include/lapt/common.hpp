// Copyright 2026 the lapt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lapt {

namespace detail {

template <typename... Args>
std::string cat(Args&&... args) {
  std::ostringstream oss;
  (oss << ... << std::forward<Args>(args));
  return oss.str();
}

}  // namespace detail

// Error taxonomy shared by all modules. The CLI maps these onto exit codes.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad call arguments: shape mismatches, out-of-range timesteps, non-binary masks.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values or schema violations.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed on-disk data: bad magic, truncated payload, schema mismatch.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures.
class IoError : public Error {
 public:
  using Error::Error;
};

// A callable supplied by the caller violated its contract.
class ContractError : public Error {
 public:
  using Error::Error;
};

template <typename E = ArgumentError, typename... Args>
[[noreturn]] void fail(Args&&... args) {
  throw E(detail::cat(std::forward<Args>(args)...));
}

template <typename E = ArgumentError, typename... Args>
void require(bool cond, Args&&... args) {
  if (!cond) fail<E>(std::forward<Args>(args)...);
}

// FNV-1a 64-bit, used for config hashes and parameter checksums.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ull) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

}  // namespace lapt
