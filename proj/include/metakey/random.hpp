// Copyright 2026 The Metakey Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <openssl/rand.h>

#include <concepts>
#include <cstdint>
#include <limits>

#include "metakey/bytes.hpp"
#include "metakey/crypto/aes.hpp"
#include "metakey/crypto/hash.hpp"

namespace metakey {

/// Anything that can fill a buffer with random bytes. Every key, nonce and
/// inner AONT key in the library is drawn through one of these.
template <class R>
concept ByteSource = requires(R& r, std::span<std::uint8_t> out) {
  { r.fill(out) } -> std::same_as<void>;
};

/// Deterministic generator: AES-128 in counter mode keyed by
/// SHA-256("metakey/drbg" || seed). Same seed, same stream.
class Drbg {
 public:
  explicit Drbg(std::uint64_t seed) : cipher_(derive_key(seed)) {}

  void fill(std::span<std::uint8_t> out) {
    for (std::uint8_t& b : out) {
      if (used_ == buffer_.size()) refill();
      b = buffer_[used_++];
    }
  }

  template <std::size_t N>
  ByteArray<N> bytes() {
    ByteArray<N> out;
    fill(out);
    return out;
  }

  std::uint64_t next_u64() {
    auto raw = bytes<8>();
    std::uint64_t v = 0;
    for (std::uint8_t b : raw) v = (v << 8) | b;
    return v;
  }

  /// Uniform integer in [0, bound) by rejection sampling.
  std::uint64_t uniform(std::uint64_t bound) {
    if (bound == 0) throw Error(ErrorCode::invalid_argument, "empty range");
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % bound;
    for (;;) {
      std::uint64_t v = next_u64();
      if (v < limit) return v % bound;
    }
  }

 private:
  static crypto::Aes128::Key derive_key(std::uint64_t seed) {
    Writer w;
    w.raw(as_bytes("metakey/drbg"));
    w.u64(seed);
    crypto::Digest d = crypto::hash(w.bytes());
    crypto::Aes128::Key key;
    std::copy_n(d.begin(), key.size(), key.begin());
    return key;
  }

  void refill() {
    crypto::Aes128::Block ctr{};
    std::uint64_t c = counter_++;
    for (int i = 0; i < 8; ++i) ctr[15 - i] = static_cast<std::uint8_t>(c >> (8 * i));
    buffer_ = cipher_.encrypt(ctr);
    used_ = 0;
  }

  crypto::Aes128 cipher_;
  crypto::Aes128::Block buffer_{};
  std::size_t used_ = buffer_.size();
  std::uint64_t counter_ = 0;
};

/// A 64-bit seed from operating-system entropy.
inline std::uint64_t system_seed() {
  ByteArray<8> raw;
  if (RAND_bytes(raw.data(), static_cast<int>(raw.size())) != 1) {
    throw Error(ErrorCode::configuration, "system entropy unavailable");
  }
  std::uint64_t v = 0;
  for (std::uint8_t b : raw) v = (v << 8) | b;
  return v;
}

}  // namespace metakey
