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

#include <vector>

#include "metakey/crypto/block_cipher.hpp"

namespace metakey::crypto {

/// Package transform. The output has one more block than the input; the
/// extra block hides the inner key k_r under the hash of all other blocks,
/// so losing any block loses k_r and with it the whole message.
///
///   m'_i     = m_i ^ E(k_r, ctr_i)            i = 1..s
///   h_i      = E(K_0, m'_i ^ ctr_i)           K_0 = all-zero key
///   m'_{s+1} = k_r ^ h_1 ^ ... ^ h_s
template <BlockCipher C>
std::vector<typename C::Block> aont_forward(
    std::span<const typename C::Block> blocks, const typename C::Key& inner_key) {
  using Block = typename C::Block;
  if (blocks.empty()) throw Error(ErrorCode::size, "AONT input is empty");
  const C keyed(inner_key);
  const C fixed(typename C::Key{});
  std::vector<Block> out;
  out.reserve(blocks.size() + 1);
  Block tail = inner_key;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const Block ctr = counter_block<C::kBlockSize>(i + 1);
    Block pseudo = blocks[i] ^ keyed.encrypt(ctr);
    tail ^= fixed.encrypt(pseudo ^ ctr);
    out.push_back(pseudo);
  }
  out.push_back(tail);
  return out;
}

template <BlockCipher C>
std::vector<typename C::Block> aont_forward(
    const std::vector<typename C::Block>& blocks, const typename C::Key& inner_key) {
  return aont_forward<C>(std::span<const typename C::Block>(blocks), inner_key);
}

/// Recovers k_r from the public blocks and strips the keystream. Unkeyed and
/// unauthenticated: corrupt input yields garbage, not an error.
template <BlockCipher C>
std::vector<typename C::Block> aont_inverse(
    std::span<const typename C::Block> pseudo) {
  using Block = typename C::Block;
  if (pseudo.size() < 2) {
    throw Error(ErrorCode::size, "pseudomessage needs at least two blocks");
  }
  const std::size_t s = pseudo.size() - 1;
  const C fixed(typename C::Key{});
  Block inner_key = pseudo[s];
  for (std::size_t i = 0; i < s; ++i) {
    inner_key ^= fixed.encrypt(pseudo[i] ^ counter_block<C::kBlockSize>(i + 1));
  }
  const C keyed(inner_key);
  std::vector<Block> out(s);
  for (std::size_t i = 0; i < s; ++i) {
    out[i] = pseudo[i] ^ keyed.encrypt(counter_block<C::kBlockSize>(i + 1));
  }
  return out;
}

template <BlockCipher C>
std::vector<typename C::Block> aont_inverse(
    const std::vector<typename C::Block>& pseudo) {
  return aont_inverse<C>(std::span<const typename C::Block>(pseudo));
}

}  // namespace metakey::crypto
