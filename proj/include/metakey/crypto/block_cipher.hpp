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

#include <concepts>
#include <cstddef>

#include "metakey/bytes.hpp"

namespace metakey::crypto {

/// A keyed permutation on fixed-size blocks. The AONT folds the inner key
/// into a block, so key and block widths must agree.
template <class C>
concept BlockCipher =
    requires(const C& cipher, const typename C::Block& block,
             const typename C::Key& key) {
      { C::kBlockSize } -> std::convertible_to<std::size_t>;
      { C::kKeySize } -> std::convertible_to<std::size_t>;
      C{key};
      { cipher.encrypt(block) } -> std::same_as<typename C::Block>;
      { cipher.decrypt(block) } -> std::same_as<typename C::Block>;
    } &&
    std::same_as<typename C::Block, ByteArray<C::kBlockSize>> &&
    std::same_as<typename C::Key, ByteArray<C::kKeySize>> &&
    C::kBlockSize == C::kKeySize;

/// Big-endian block encoding of a counter value.
template <std::size_t N>
ByteArray<N> counter_block(std::uint64_t i) {
  ByteArray<N> out{};
  for (std::size_t k = 0; k < N && k < 8; ++k) {
    out[N - 1 - k] = static_cast<std::uint8_t>(i >> (8 * k));
  }
  return out;
}

/// (base + i) mod 2^(8N), both big-endian.
template <std::size_t N>
ByteArray<N> add_counter(const ByteArray<N>& base, std::uint64_t i) {
  ByteArray<N> out = base;
  unsigned carry = 0;
  for (std::size_t k = 0; k < N; ++k) {
    std::size_t pos = N - 1 - k;
    unsigned addend = k < 8 ? static_cast<unsigned>((i >> (8 * k)) & 0xff) : 0;
    unsigned sum = out[pos] + addend + carry;
    out[pos] = static_cast<std::uint8_t>(sum);
    carry = sum >> 8;
  }
  return out;
}

}  // namespace metakey::crypto
