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

#include <array>
#include <numeric>

#include "metakey/crypto/block_cipher.hpp"
#include "metakey/random.hpp"

namespace metakey::crypto {

/// Test-only 16-bit cipher: 16-bit key, 16-bit block, a four-round Feistel
/// network over bytes with an S-box shuffled from a fixed seed. Small enough
/// that every key can be tried. Never use it for data.
class ToyCipher16 {
 public:
  static constexpr std::size_t kBlockSize = 2;
  static constexpr std::size_t kKeySize = 2;
  static constexpr int kRounds = 4;
  static constexpr std::uint64_t kSboxSeed = 0x746f7931'36636970ULL;
  using Block = ByteArray<kBlockSize>;
  using Key = ByteArray<kKeySize>;

  explicit ToyCipher16(const Key& key) {
    // Both key bytes enter directly, so distinct keys give distinct
    // schedules. Folding the key down to one byte would leave 8 bits.
    const auto& s = sbox();
    round_keys_[0] = key[0];
    round_keys_[1] = key[1];
    round_keys_[2] = static_cast<std::uint8_t>(s[key[0] ^ 0x3b] + key[1]);
    round_keys_[3] = static_cast<std::uint8_t>(s[key[1] ^ 0x76] ^ key[0]);
  }

  Block encrypt(const Block& in) const {
    std::uint8_t left = in[0], right = in[1];
    for (int r = 0; r < kRounds; ++r) {
      std::uint8_t next = left ^ f(right, r);
      left = right;
      right = next;
    }
    return {left, right};
  }

  Block decrypt(const Block& in) const {
    std::uint8_t left = in[0], right = in[1];
    for (int r = kRounds - 1; r >= 0; --r) {
      std::uint8_t prev = right ^ f(left, r);
      right = left;
      left = prev;
    }
    return {left, right};
  }

 private:
  static const std::array<std::uint8_t, 256>& sbox() {
    static const std::array<std::uint8_t, 256> table = [] {
      std::array<std::uint8_t, 256> t;
      std::iota(t.begin(), t.end(), std::uint8_t{0});
      Drbg rng(kSboxSeed);
      for (std::size_t i = t.size() - 1; i > 0; --i) {
        std::swap(t[i], t[rng.uniform(i + 1)]);
      }
      return t;
    }();
    return table;
  }

  std::uint8_t f(std::uint8_t x, int r) const {
    const auto& s = sbox();
    std::uint8_t y = s[x ^ round_keys_[r]];
    return s[static_cast<std::uint8_t>(y + round_keys_[(r + 1) % kRounds])];
  }

  std::array<std::uint8_t, kRounds> round_keys_{};
};

static_assert(BlockCipher<ToyCipher16>);

}  // namespace metakey::crypto
