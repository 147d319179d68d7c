// Copyright 2026 The ftune Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <openssl/evp.h>

#include <bit>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "ftune/core.hpp"

namespace ftune::io {
using Bytes = std::vector<std::uint8_t>;
}  // namespace ftune::io

namespace ftune::io::detail {

inline constexpr std::size_t kDigestSize = 32;

/// Little-endian byte sink.
class Writer {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename T>
  void le(T v) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }
  void f64(double d) { le(std::bit_cast<std::uint64_t>(d)); }
  Bytes& bytes() { return out_; }

 private:
  Bytes out_;
};

/// Bounds-checked little-endian reader; truncation is a FormatError.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  std::span<const std::uint8_t> take(std::size_t n) {
    if (n > in_.size() - pos_) throw FormatError("checkpoint truncated");
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename T>
  T le() {
    using U = std::make_unsigned_t<T>;
    U u = 0;
    auto s = take(sizeof(T));
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(static_cast<U>(s[i]) << (8 * i));
    return static_cast<T>(u);
  }
  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

inline Bytes sha256(std::span<const std::uint8_t> bytes) {
  Bytes out(kDigestSize);
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != kDigestSize) {
    throw std::runtime_error("SHA-256 failed");
  }
  return out;
}

}  // namespace ftune::io::detail
