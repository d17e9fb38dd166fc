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

#include <openssl/crypto.h>
#include <openssl/evp.h>

#include <memory>

#include "metakey/crypto/aes.hpp"
#include "metakey/crypto/block_cipher.hpp"
#include "metakey/crypto/hash.hpp"
#include "metakey/random.hpp"

namespace metakey::crypto {

// Hybrid public-key envelope used for meta-keys and share grants.
//
//   blob = ephemeral X25519 public (32) | ciphertext | HMAC-SHA-256 tag (32)
//
// shared = X25519(ephemeral, recipient); the AES-128 counter-mode key and the
// MAC key are SHA-256 of a one-byte label, shared, ephemeral public and
// recipient public. The tag covers ephemeral public and ciphertext.

inline constexpr std::size_t kEnvelopeKeySize = 32;
inline constexpr std::size_t kMaxEnvelopePayload = 4096;
inline constexpr std::size_t kEnvelopeOverhead = 64;

using PublicKey = ByteArray<kEnvelopeKeySize>;
using PrivateKey = ByteArray<kEnvelopeKeySize>;

struct KeyPair {
  PublicKey public_key{};
  PrivateKey private_key{};
};

namespace detail {

struct PkeyDeleter {
  void operator()(EVP_PKEY* k) const { EVP_PKEY_free(k); }
};
struct PkeyCtxDeleter {
  void operator()(EVP_PKEY_CTX* c) const { EVP_PKEY_CTX_free(c); }
};
using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyDeleter>;
using PkeyCtxPtr = std::unique_ptr<EVP_PKEY_CTX, PkeyCtxDeleter>;

inline PkeyPtr private_pkey(const PrivateKey& priv) {
  PkeyPtr k(EVP_PKEY_new_raw_private_key(EVP_PKEY_X25519, nullptr, priv.data(),
                                         priv.size()));
  if (!k) throw Error(ErrorCode::envelope, "invalid X25519 private key");
  return k;
}

inline PkeyPtr public_pkey(const PublicKey& pub) {
  PkeyPtr k(EVP_PKEY_new_raw_public_key(EVP_PKEY_X25519, nullptr, pub.data(),
                                        pub.size()));
  if (!k) throw Error(ErrorCode::envelope, "invalid X25519 public key");
  return k;
}

inline PublicKey public_of(const PrivateKey& priv) {
  PkeyPtr k = private_pkey(priv);
  PublicKey pub;
  std::size_t len = pub.size();
  if (EVP_PKEY_get_raw_public_key(k.get(), pub.data(), &len) != 1 ||
      len != pub.size()) {
    throw Error(ErrorCode::envelope, "X25519 public key derivation failed");
  }
  return pub;
}

inline ByteArray<32> agree(const PrivateKey& priv, const PublicKey& peer) {
  PkeyPtr mine = private_pkey(priv);
  PkeyPtr theirs = public_pkey(peer);
  PkeyCtxPtr ctx(EVP_PKEY_CTX_new(mine.get(), nullptr));
  ByteArray<32> shared;
  std::size_t len = shared.size();
  if (!ctx || EVP_PKEY_derive_init(ctx.get()) != 1 ||
      EVP_PKEY_derive_set_peer(ctx.get(), theirs.get()) != 1 ||
      EVP_PKEY_derive(ctx.get(), shared.data(), &len) != 1 ||
      len != shared.size()) {
    throw Error(ErrorCode::envelope, "X25519 key agreement failed");
  }
  return shared;
}

inline Digest kdf(std::uint8_t label, const ByteArray<32>& shared,
                  const PublicKey& ephemeral, const PublicKey& recipient) {
  Writer w;
  w.raw(as_bytes("metakey/envelope"));
  w.u8(label);
  w.raw(shared);
  w.raw(ephemeral);
  w.raw(recipient);
  return hash(w.bytes());
}

inline void ctr_xor(const Digest& key_material, std::span<std::uint8_t> data) {
  Aes128::Key key;
  std::copy_n(key_material.begin(), key.size(), key.begin());
  const Aes128 cipher(key);
  for (std::size_t off = 0, i = 0; off < data.size(); off += 16, ++i) {
    auto pad = cipher.encrypt(counter_block<16>(i));
    for (std::size_t j = 0; j < 16 && off + j < data.size(); ++j) {
      data[off + j] ^= pad[j];
    }
  }
}

}  // namespace detail

/// Deterministic from a 32-byte seed; the seed is the clamped private scalar.
inline KeyPair envelope_keygen(const ByteArray<32>& seed) {
  KeyPair kp;
  kp.private_key = seed;
  kp.public_key = detail::public_of(kp.private_key);
  return kp;
}

template <ByteSource R>
KeyPair envelope_keygen(R& rng) {
  ByteArray<32> seed;
  rng.fill(seed);
  return envelope_keygen(seed);
}

template <ByteSource R>
Bytes envelope_wrap(const PublicKey& recipient, ByteView payload, R& rng) {
  if (payload.size() > kMaxEnvelopePayload) {
    throw Error(ErrorCode::size, "envelope payload exceeds 4 KiB");
  }
  const KeyPair ephemeral = envelope_keygen(rng);
  const auto shared = detail::agree(ephemeral.private_key, recipient);
  const Digest enc_key = detail::kdf(1, shared, ephemeral.public_key, recipient);
  const Digest mac_key = detail::kdf(2, shared, ephemeral.public_key, recipient);

  Bytes blob(kEnvelopeKeySize + payload.size());
  std::copy(ephemeral.public_key.begin(), ephemeral.public_key.end(), blob.begin());
  std::copy(payload.begin(), payload.end(), blob.begin() + kEnvelopeKeySize);
  detail::ctr_xor(enc_key, std::span(blob).subspan(kEnvelopeKeySize));
  const Digest tag = hmac_sha256(mac_key, blob);
  blob.insert(blob.end(), tag.begin(), tag.end());
  return blob;
}

inline Bytes envelope_unwrap(const KeyPair& keys, ByteView blob) {
  if (blob.size() < kEnvelopeOverhead) {
    throw Error(ErrorCode::envelope, "envelope blob too short");
  }
  PublicKey ephemeral;
  std::copy_n(blob.begin(), ephemeral.size(), ephemeral.begin());
  const auto shared = detail::agree(keys.private_key, ephemeral);
  const Digest enc_key = detail::kdf(1, shared, ephemeral, keys.public_key);
  const Digest mac_key = detail::kdf(2, shared, ephemeral, keys.public_key);

  ByteView body = blob.first(blob.size() - kDigestSize);
  ByteView tag = blob.last(kDigestSize);
  const Digest expected = hmac_sha256(mac_key, body);
  if (CRYPTO_memcmp(expected.data(), tag.data(), kDigestSize) != 0) {
    throw Error(ErrorCode::envelope, "envelope integrity check failed");
  }
  Bytes payload(body.begin() + kEnvelopeKeySize, body.end());
  detail::ctr_xor(enc_key, payload);
  return payload;
}

}  // namespace metakey::crypto
