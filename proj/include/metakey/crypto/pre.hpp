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

#include <algorithm>
#include <map>
#include <string_view>
#include <vector>

#include "metakey/crypto/aes.hpp"
#include "metakey/crypto/aont.hpp"
#include "metakey/crypto/block_cipher.hpp"
#include "metakey/crypto/padding.hpp"
#include "metakey/random.hpp"

namespace metakey::crypto {

/// Sorted, duplicate-free, 1-based indices of the pseudoblocks that are
/// additionally encrypted under the file key. Only these blocks change on
/// re-encryption.
class BlockSet {
 public:
  BlockSet() = default;

  /// Validates against a pseudomessage of block_count blocks.
  BlockSet(std::vector<std::uint32_t> indices, std::uint32_t block_count)
      : indices_(std::move(indices)) {
    std::sort(indices_.begin(), indices_.end());
    if (indices_.empty()) {
      throw Error(ErrorCode::invalid_argument, "designated block set is empty");
    }
    if (std::adjacent_find(indices_.begin(), indices_.end()) != indices_.end()) {
      throw Error(ErrorCode::invalid_argument,
                  "designated block set has duplicates");
    }
    if (indices_.front() < 1 || indices_.back() > block_count) {
      throw Error(ErrorCode::invalid_argument,
                  "designated block index outside [1, block_count]");
    }
  }

  const std::vector<std::uint32_t>& indices() const { return indices_; }
  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  bool contains(std::uint32_t i) const {
    return std::binary_search(indices_.begin(), indices_.end(), i);
  }

  friend bool operator==(const BlockSet&, const BlockSet&) = default;

 private:
  std::vector<std::uint32_t> indices_;
};

/// How the designated set is chosen for a pseudomessage of n blocks.
enum class DPolicy : std::uint8_t {
  last = 0,        // {n}: the masked-key block
  first_last = 1,  // {1, n}
  all = 2,         // {1..n}
};

inline std::string_view to_string(DPolicy p) {
  switch (p) {
    case DPolicy::last: return "last";
    case DPolicy::first_last: return "first-last";
    case DPolicy::all: return "all";
  }
  return "unknown";
}

inline DPolicy parse_dpolicy(std::string_view name) {
  if (name == "last") return DPolicy::last;
  if (name == "first-last") return DPolicy::first_last;
  if (name == "all") return DPolicy::all;
  throw Error(ErrorCode::configuration,
              "unknown dpolicy '" + std::string(name) + "'");
}

inline DPolicy dpolicy_from_byte(std::uint8_t b) {
  if (b > static_cast<std::uint8_t>(DPolicy::all)) {
    throw Error(ErrorCode::format, "unknown dpolicy code");
  }
  return static_cast<DPolicy>(b);
}

inline BlockSet designated_blocks(DPolicy policy, std::uint32_t block_count) {
  std::vector<std::uint32_t> idx;
  switch (policy) {
    case DPolicy::last:
      idx = {block_count};
      break;
    case DPolicy::first_last:
      idx = block_count > 1 ? std::vector<std::uint32_t>{1, block_count}
                            : std::vector<std::uint32_t>{block_count};
      break;
    case DPolicy::all:
      idx.resize(block_count);
      for (std::uint32_t i = 0; i < block_count; ++i) idx[i] = i + 1;
      break;
  }
  return BlockSet(std::move(idx), block_count);
}

inline constexpr std::uint8_t kCiphertextVersion = 1;
inline constexpr std::string_view kCiphertextMagic = "MKC1";
inline constexpr std::size_t kMaxDesignated = 0xffff;  // u16 count on the wire

template <std::size_t N>
struct BasicFileCiphertext {
  using Block = ByteArray<N>;

  std::uint8_t version = kCiphertextVersion;
  ByteArray<N> nonce{};
  std::uint32_t block_count = 0;
  BlockSet dset;
  std::vector<Block> blocks;

  friend bool operator==(const BasicFileCiphertext&,
                         const BasicFileCiphertext&) = default;
};

using FileCiphertext = BasicFileCiphertext<Aes128::kBlockSize>;
using SymKey = Aes128::Key;
using Nonce = ByteArray<Aes128::kBlockSize>;

/// Blob layout, big-endian:
///   "MKC1" | version u8 | nonce | block_count u32 | dset size u16 |
///   dset indices u32 ascending | blocks
template <std::size_t N>
Bytes serialize(const BasicFileCiphertext<N>& c) {
  if (c.dset.size() > kMaxDesignated) {
    throw Error(ErrorCode::size, "designated set too large for blob format");
  }
  Writer w;
  w.raw(as_bytes(kCiphertextMagic));
  w.u8(c.version);
  w.raw(c.nonce);
  w.u32(c.block_count);
  w.u16(static_cast<std::uint16_t>(c.dset.size()));
  for (std::uint32_t i : c.dset.indices()) w.u32(i);
  for (const auto& b : c.blocks) w.raw(b);
  return std::move(w).take();
}

template <std::size_t N = Aes128::kBlockSize>
BasicFileCiphertext<N> deserialize_ciphertext(ByteView blob) {
  Reader r(blob);
  ByteView magic = r.raw(kCiphertextMagic.size());
  if (!std::equal(magic.begin(), magic.end(), kCiphertextMagic.begin())) {
    throw Error(ErrorCode::format, "not a ciphertext blob (bad magic)");
  }
  BasicFileCiphertext<N> c;
  c.version = r.u8();
  if (c.version != kCiphertextVersion) {
    throw Error(ErrorCode::format, "unsupported ciphertext version");
  }
  c.nonce = r.array<N>();
  c.block_count = r.u32();
  if (c.block_count < 2) {
    throw Error(ErrorCode::format, "ciphertext needs at least two blocks");
  }
  std::uint16_t dcount = r.u16();
  std::vector<std::uint32_t> idx(dcount);
  for (auto& i : idx) i = r.u32();
  if (!std::is_sorted(idx.begin(), idx.end())) {
    throw Error(ErrorCode::format, "designated indices not ascending");
  }
  try {
    c.dset = BlockSet(std::move(idx), c.block_count);
  } catch (const Error& e) {
    throw Error(ErrorCode::format, e.what());
  }
  if (r.remaining() != std::size_t{c.block_count} * N) {
    throw Error(ErrorCode::format, "block section length mismatch");
  }
  c.blocks.resize(c.block_count);
  for (auto& b : c.blocks) b = r.array<N>();
  return c;
}

/// Counter-mode pad for pseudoblock i: E(key, nonce + i mod 2^(8N)).
template <BlockCipher C = Aes128>
typename C::Block keystream(const C& cipher, const typename C::Block& nonce,
                            std::uint64_t i) {
  if (i < 1) throw Error(ErrorCode::invalid_argument, "keystream index is 1-based");
  return cipher.encrypt(add_counter(nonce, i));
}

template <BlockCipher C = Aes128>
typename C::Block keystream(const typename C::Key& key,
                            const typename C::Block& nonce, std::uint64_t i) {
  return keystream<C>(C(key), nonce, i);
}

template <BlockCipher C = Aes128, ByteSource R>
BasicFileCiphertext<C::kBlockSize> pre_encrypt(
    const typename C::Key& key, ByteView plaintext, DPolicy policy, R& rng,
    std::size_t max_message = kDefaultMaxMessage) {
  auto padded = pad<C::kBlockSize>(plaintext, max_message);
  typename C::Key inner_key;
  rng.fill(inner_key);
  BasicFileCiphertext<C::kBlockSize> c;
  c.blocks = aont_forward<C>(padded, inner_key);
  c.block_count = static_cast<std::uint32_t>(c.blocks.size());
  c.dset = designated_blocks(policy, c.block_count);
  if (c.dset.size() > kMaxDesignated) {
    throw Error(ErrorCode::size,
                "policy '" + std::string(to_string(policy)) +
                    "' designates more blocks than the blob format allows");
  }
  rng.fill(c.nonce);
  const C cipher(key);
  for (std::uint32_t i : c.dset.indices()) {
    c.blocks[i - 1] ^= keystream<C>(cipher, c.nonce, i);
  }
  return c;
}

template <BlockCipher C = Aes128>
Bytes pre_decrypt(const typename C::Key& key,
                  const BasicFileCiphertext<C::kBlockSize>& c) {
  if (c.blocks.size() != c.block_count || c.block_count < 2) {
    throw Error(ErrorCode::format, "malformed ciphertext");
  }
  std::vector<typename C::Block> pseudo = c.blocks;
  const C cipher(key);
  for (std::uint32_t i : c.dset.indices()) {
    pseudo[i - 1] ^= keystream<C>(cipher, c.nonce, i);
  }
  auto padded = aont_inverse<C>(pseudo);
  return unpad<C::kBlockSize>(padded);
}

/// The transformation rule handed to the proxy: a fresh nonce and one XOR
/// pad per designated block. Its size depends only on |D|.
template <std::size_t N>
struct BasicReEncryptionKey {
  ByteArray<N> new_nonce{};
  std::map<std::uint32_t, ByteArray<N>> pads;

  friend bool operator==(const BasicReEncryptionKey&,
                         const BasicReEncryptionKey&) = default;
};

using ReEncryptionKey = BasicReEncryptionKey<Aes128::kBlockSize>;

template <BlockCipher C = Aes128>
BasicReEncryptionKey<C::kBlockSize> rekey_with_nonce(
    const typename C::Key& old_key, const typename C::Block& old_nonce,
    const typename C::Key& new_key, const typename C::Block& new_nonce,
    const BlockSet& dset) {
  if (dset.empty()) {
    throw Error(ErrorCode::invalid_argument, "rekey needs a non-empty block set");
  }
  const C old_cipher(old_key);
  const C new_cipher(new_key);
  BasicReEncryptionKey<C::kBlockSize> rk;
  rk.new_nonce = new_nonce;
  for (std::uint32_t i : dset.indices()) {
    rk.pads.emplace(i, keystream<C>(old_cipher, old_nonce, i) ^
                           keystream<C>(new_cipher, new_nonce, i));
  }
  return rk;
}

template <BlockCipher C = Aes128, ByteSource R>
BasicReEncryptionKey<C::kBlockSize> rekey(const typename C::Key& old_key,
                                          const typename C::Block& old_nonce,
                                          const typename C::Key& new_key,
                                          const BlockSet& dset, R& rng) {
  typename C::Block new_nonce;
  rng.fill(new_nonce);
  return rekey_with_nonce<C>(old_key, old_nonce, new_key, new_nonce, dset);
}

/// Proxy side. Touches only the designated blocks and the nonce; never sees
/// either key or the plaintext.
template <std::size_t N>
BasicFileCiphertext<N> reencrypt(const BasicReEncryptionKey<N>& rk,
                                 BasicFileCiphertext<N> c) {
  if (rk.pads.size() != c.dset.size() ||
      !std::equal(c.dset.indices().begin(), c.dset.indices().end(),
                  rk.pads.begin(),
                  [](std::uint32_t i, const auto& kv) { return kv.first == i; })) {
    throw Error(ErrorCode::invalid_argument,
                "re-encryption key does not match the ciphertext's block set");
  }
  for (const auto& [i, pad] : rk.pads) c.blocks[i - 1] ^= pad;
  c.nonce = rk.new_nonce;
  return c;
}

/// Wire form of a re-encryption key:
///   new_nonce | count u16 | (index u32 | pad)*
template <std::size_t N>
Bytes serialize(const BasicReEncryptionKey<N>& rk) {
  if (rk.pads.size() > kMaxDesignated) {
    throw Error(ErrorCode::size, "re-encryption key too large");
  }
  Writer w;
  w.raw(rk.new_nonce);
  w.u16(static_cast<std::uint16_t>(rk.pads.size()));
  for (const auto& [i, pad] : rk.pads) {
    w.u32(i);
    w.raw(pad);
  }
  return std::move(w).take();
}

template <std::size_t N = Aes128::kBlockSize>
BasicReEncryptionKey<N> deserialize_rekey(ByteView data) {
  Reader r(data);
  BasicReEncryptionKey<N> rk;
  rk.new_nonce = r.array<N>();
  std::uint16_t count = r.u16();
  for (std::uint16_t k = 0; k < count; ++k) {
    std::uint32_t i = r.u32();
    if (!rk.pads.emplace(i, r.array<N>()).second) {
      throw Error(ErrorCode::format, "duplicate pad index");
    }
  }
  r.expect_done();
  return rk;
}

}  // namespace metakey::crypto
