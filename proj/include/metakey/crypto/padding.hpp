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

#include "metakey/bytes.hpp"

namespace metakey::crypto {

inline constexpr std::size_t kDefaultMaxMessage = 16u << 20;  // 16 MiB

/// Fill-byte padding: append p copies of p, p = N - len % N (so p = N on
/// aligned input). Always adds at least one byte.
template <std::size_t N = 16>
std::vector<ByteArray<N>> pad(ByteView message,
                              std::size_t max_message = kDefaultMaxMessage) {
  static_assert(N >= 1 && N <= 255);
  if (message.size() > max_message) {
    throw Error(ErrorCode::size, "message of " + std::to_string(message.size()) +
                                     " bytes exceeds limit of " +
                                     std::to_string(max_message));
  }
  const std::size_t count = message.size() / N + 1;
  const auto p = static_cast<std::uint8_t>(N - message.size() % N);
  std::vector<ByteArray<N>> blocks(count);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      std::size_t pos = i * N + j;
      blocks[i][j] = pos < message.size() ? message[pos] : p;
    }
  }
  return blocks;
}

/// Inverse of pad. A padding error here usually means a wrong key.
template <std::size_t N = 16>
Bytes unpad(std::span<const ByteArray<N>> blocks) {
  if (blocks.empty()) throw Error(ErrorCode::padding, "no blocks to unpad");
  const ByteArray<N>& last = blocks.back();
  const std::uint8_t p = last[N - 1];
  if (p == 0 || p > N) {
    throw Error(ErrorCode::padding, "pad byte out of range");
  }
  for (std::size_t j = N - p; j < N; ++j) {
    if (last[j] != p) throw Error(ErrorCode::padding, "inconsistent pad bytes");
  }
  Bytes out;
  out.reserve(blocks.size() * N - p);
  for (const auto& b : blocks) out.insert(out.end(), b.begin(), b.end());
  out.resize(out.size() - p);
  return out;
}

template <std::size_t N = 16>
Bytes unpad(const std::vector<ByteArray<N>>& blocks) {
  return unpad<N>(std::span<const ByteArray<N>>(blocks));
}

}  // namespace metakey::crypto
