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

#include <openssl/evp.h>

#include <memory>

#include "metakey/bytes.hpp"

namespace metakey::crypto {

/// AES-128 single-block permutation. The key schedule is expanded once at
/// construction; encrypt/decrypt operate on exactly one 16-byte block.
class Aes128 {
 public:
  static constexpr std::size_t kBlockSize = 16;
  static constexpr std::size_t kKeySize = 16;
  using Block = ByteArray<kBlockSize>;
  using Key = ByteArray<kKeySize>;

  explicit Aes128(const Key& key)
      : enc_(make_ctx(key, /*encrypt=*/true)),
        dec_(make_ctx(key, /*encrypt=*/false)) {}

  /// Runtime-length entry point; rejects anything that is not 16 bytes.
  static Block encrypt_checked(ByteView key, ByteView block) {
    if (key.size() != kKeySize || block.size() != kBlockSize) {
      throw Error(ErrorCode::size,
                  "AES-128 needs a 16-byte key and a 16-byte block");
    }
    Key k;
    Block b;
    std::copy(key.begin(), key.end(), k.begin());
    std::copy(block.begin(), block.end(), b.begin());
    return Aes128(k).encrypt(b);
  }

  Block encrypt(const Block& in) const { return run(enc_.get(), in); }
  Block decrypt(const Block& in) const { return run(dec_.get(), in); }

 private:
  struct CtxDeleter {
    void operator()(EVP_CIPHER_CTX* ctx) const { EVP_CIPHER_CTX_free(ctx); }
  };
  using CtxPtr = std::unique_ptr<EVP_CIPHER_CTX, CtxDeleter>;

  static CtxPtr make_ctx(const Key& key, bool encrypt) {
    CtxPtr ctx(EVP_CIPHER_CTX_new());
    if (!ctx || EVP_CipherInit_ex(ctx.get(), EVP_aes_128_ecb(), nullptr,
                                  key.data(), nullptr, encrypt ? 1 : 0) != 1) {
      throw Error(ErrorCode::invalid_argument, "AES-128 key setup failed");
    }
    EVP_CIPHER_CTX_set_padding(ctx.get(), 0);
    return ctx;
  }

  static Block run(EVP_CIPHER_CTX* ctx, const Block& in) {
    Block out;
    int len = 0;
    if (EVP_CipherUpdate(ctx, out.data(), &len, in.data(),
                         static_cast<int>(kBlockSize)) != 1 ||
        len != static_cast<int>(kBlockSize)) {
      throw Error(ErrorCode::invalid_argument, "AES-128 block operation failed");
    }
    return out;
  }

  CtxPtr enc_;
  CtxPtr dec_;
};

}  // namespace metakey::crypto
