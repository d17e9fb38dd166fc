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
#include <openssl/hmac.h>

#include "metakey/bytes.hpp"

namespace metakey::crypto {

inline constexpr std::size_t kDigestSize = 32;

/// SHA-256 output. Used for file ids, content hashes and block hashes.
using Digest = ByteArray<kDigestSize>;

inline Digest hash(ByteView data) {
  Digest out;
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(),
                 nullptr) != 1 ||
      len != kDigestSize) {
    throw Error(ErrorCode::invalid_argument, "SHA-256 computation failed");
  }
  return out;
}

inline Digest hmac_sha256(ByteView key, ByteView data) {
  Digest out;
  unsigned int len = 0;
  if (HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()),
           data.data(), data.size(), out.data(), &len) == nullptr ||
      len != kDigestSize) {
    throw Error(ErrorCode::invalid_argument, "HMAC-SHA-256 computation failed");
  }
  return out;
}

}  // namespace metakey::crypto
