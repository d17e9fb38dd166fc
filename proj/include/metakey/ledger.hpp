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

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "metakey/bytes.hpp"
#include "metakey/crypto/hash.hpp"
#include "metakey/node_id.hpp"

namespace metakey::ledger {

using crypto::Digest;

/// On-chain meta-key record. The storage location is not a clear field: it
/// travels inside wrapped_key with the file key, so only the owner can map a
/// file to the node that holds it.
struct MetadataRecord {
  Digest file_id{};       // hash of the stored ciphertext blob
  NodeId owner_id;
  Digest content_hash{};  // equal to file_id for blobs stored by the protocol
  Bytes wrapped_key;      // envelope to the owner's public key
  std::uint64_t created_at = 0;

  friend bool operator==(const MetadataRecord&, const MetadataRecord&) = default;
};

/// Public trace of a share. Holds a hash of the grant only.
struct ShareRecord {
  Digest file_id{};
  NodeId owner_id;
  Digest grant_hash{};
  std::uint64_t created_at = 0;

  friend bool operator==(const ShareRecord&, const ShareRecord&) = default;
};

using Record = std::variant<MetadataRecord, ShareRecord>;

enum class RecordKind : std::uint8_t { metadata = 1, share = 2 };

inline RecordKind kind_of(const Record& r) {
  return std::holds_alternative<MetadataRecord>(r) ? RecordKind::metadata
                                                   : RecordKind::share;
}

inline const Digest& file_id_of(const Record& r) {
  return std::visit([](const auto& rec) -> const Digest& { return rec.file_id; }, r);
}

inline NodeId owner_of(const Record& r) {
  return std::visit([](const auto& rec) { return rec.owner_id; }, r);
}

struct LedgerBlock {
  std::uint64_t height = 0;
  Digest prev_hash{};
  std::uint64_t timestamp = 0;
  std::vector<Record> records;
  Digest block_hash{};

  friend bool operator==(const LedgerBlock&, const LedgerBlock&) = default;
};

struct Chain {
  std::vector<LedgerBlock> blocks;

  const LedgerBlock& tip() const { return blocks.back(); }
  std::size_t size() const { return blocks.size(); }

  friend bool operator==(const Chain&, const Chain&) = default;
};

// Canonical serialization: fields in declaration order, integers big-endian
// fixed width, byte strings raw (variable ones u32-length-prefixed), record
// list u32-count-prefixed, each record led by its kind byte.

inline void write_record(Writer& w, const Record& record) {
  w.u8(static_cast<std::uint8_t>(kind_of(record)));
  if (const auto* m = std::get_if<MetadataRecord>(&record)) {
    w.raw(m->file_id);
    w.u64(m->owner_id.value);
    w.raw(m->content_hash);
    w.var(m->wrapped_key);
    w.u64(m->created_at);
  } else {
    const auto& s = std::get<ShareRecord>(record);
    w.raw(s.file_id);
    w.u64(s.owner_id.value);
    w.raw(s.grant_hash);
    w.u64(s.created_at);
  }
}

inline Record read_record(Reader& r) {
  const std::uint8_t kind = r.u8();
  if (kind == static_cast<std::uint8_t>(RecordKind::metadata)) {
    MetadataRecord m;
    m.file_id = r.array<32>();
    m.owner_id = NodeId{r.u64()};
    m.content_hash = r.array<32>();
    m.wrapped_key = r.var();
    m.created_at = r.u64();
    return m;
  }
  if (kind == static_cast<std::uint8_t>(RecordKind::share)) {
    ShareRecord s;
    s.file_id = r.array<32>();
    s.owner_id = NodeId{r.u64()};
    s.grant_hash = r.array<32>();
    s.created_at = r.u64();
    return s;
  }
  throw Error(ErrorCode::format, "unknown record kind " + std::to_string(kind));
}

/// The bytes covered by block_hash.
inline Bytes canonical_body(const LedgerBlock& block) {
  Writer w;
  w.u64(block.height);
  w.raw(block.prev_hash);
  w.u64(block.timestamp);
  w.u32(static_cast<std::uint32_t>(block.records.size()));
  for (const auto& rec : block.records) write_record(w, rec);
  return std::move(w).take();
}

inline Digest compute_block_hash(const LedgerBlock& block) {
  return crypto::hash(canonical_body(block));
}

/// Full binary form of one block: canonical body followed by block_hash.
inline Bytes encode_block(const LedgerBlock& block) {
  Bytes out = canonical_body(block);
  out.insert(out.end(), block.block_hash.begin(), block.block_hash.end());
  return out;
}

inline LedgerBlock decode_block(ByteView data) {
  Reader r(data);
  LedgerBlock b;
  b.height = r.u64();
  b.prev_hash = r.array<32>();
  b.timestamp = r.u64();
  const std::uint32_t count = r.u32();
  // Every record is at least 77 bytes; reject absurd counts before allocating.
  if (count > r.remaining() / 77) throw Error(ErrorCode::format, "record count too large");
  b.records.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) b.records.push_back(read_record(r));
  b.block_hash = r.array<32>();
  r.expect_done();
  return b;
}

inline Chain genesis() {
  LedgerBlock g;
  g.block_hash = compute_block_hash(g);
  return Chain{{g}};
}

struct VerifyFailure {
  std::uint64_t height = 0;
  std::string reason;
};

/// nullopt when every height, link and block hash checks out; otherwise the
/// first failing position.
inline std::optional<VerifyFailure> verify(const Chain& chain) {
  if (chain.blocks.empty()) return VerifyFailure{0, "chain is empty"};
  const LedgerBlock& g = chain.blocks.front();
  if (g.prev_hash != Digest{}) return VerifyFailure{0, "genesis prev_hash is not zero"};
  if (!g.records.empty()) return VerifyFailure{0, "genesis carries records"};
  for (std::size_t i = 0; i < chain.blocks.size(); ++i) {
    const LedgerBlock& b = chain.blocks[i];
    if (b.height != i) {
      return VerifyFailure{i, "height " + std::to_string(b.height) +
                                  " out of sequence"};
    }
    if (i > 0 && b.prev_hash != chain.blocks[i - 1].block_hash) {
      return VerifyFailure{i, "prev_hash does not match predecessor"};
    }
    if (compute_block_hash(b) != b.block_hash) {
      return VerifyFailure{i, "block_hash does not match contents"};
    }
  }
  return std::nullopt;
}

/// Appends one block holding records. The input chain must verify.
inline Chain append(Chain chain, std::vector<Record> records,
                    std::uint64_t timestamp) {
  if (records.empty()) {
    throw Error(ErrorCode::invalid_argument, "append needs at least one record");
  }
  if (auto failure = verify(chain)) {
    throw Error(ErrorCode::verification,
                "cannot append to a chain failing at height " +
                    std::to_string(failure->height) + ": " + failure->reason);
  }
  LedgerBlock b;
  b.height = chain.tip().height + 1;
  b.prev_hash = chain.tip().block_hash;
  b.timestamp = timestamp;
  b.records = std::move(records);
  b.block_hash = compute_block_hash(b);
  chain.blocks.push_back(std::move(b));
  return chain;
}

struct RecordFilter {
  std::optional<NodeId> owner_id = std::nullopt;
  std::optional<Digest> file_id = std::nullopt;
  std::optional<RecordKind> kind = std::nullopt;
};

inline std::vector<Record> find_records(const Chain& chain,
                                        const RecordFilter& filter = {}) {
  std::vector<Record> out;
  for (const auto& block : chain.blocks) {
    for (const auto& rec : block.records) {
      if (filter.owner_id && owner_of(rec) != *filter.owner_id) continue;
      if (filter.file_id && file_id_of(rec) != *filter.file_id) continue;
      if (filter.kind && kind_of(rec) != *filter.kind) continue;
      out.push_back(rec);
    }
  }
  return out;
}

}  // namespace metakey::ledger
