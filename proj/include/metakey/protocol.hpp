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

#include <set>

#include "metakey/crypto/envelope.hpp"
#include "metakey/crypto/pre.hpp"
#include "metakey/ledger.hpp"
#include "metakey/netsim.hpp"

namespace metakey::protocol {

using crypto::Digest;
using crypto::SymKey;
using ledger::Chain;
using netsim::Network;

/// A user endpoint. Holds its envelope key pair and nothing else: file keys
/// live on the chain as meta-keys, never in the agent.
struct UserAgent {
  NodeId id;
  crypto::KeyPair keypair;
};

/// How other parties address an agent.
struct Principal {
  NodeId id;
  crypto::PublicKey public_key{};
};

inline Principal principal_of(const UserAgent& agent) {
  return {agent.id, agent.keypair.public_key};
}

/// Creates an agent at id with a key pair drawn from the network generator
/// and marks the node as a user endpoint.
inline UserAgent make_agent(NodeId id, Network& net) {
  net.mark_agent(id);
  return {id, crypto::envelope_keygen(net.rng())};
}

/// Plaintext of a meta-key envelope. Everything the owner needs to fetch,
/// decrypt or rekey the file without touching the ciphertext.
struct MetaKey {
  SymKey key{};
  crypto::DPolicy policy = crypto::DPolicy::last;
  NodeId location;  // N1
  crypto::Nonce nonce{};
  std::uint32_t block_count = 0;

  friend bool operator==(const MetaKey&, const MetaKey&) = default;
};

inline constexpr std::uint8_t kMetaKeyVersion = 1;
inline constexpr std::size_t kMetaKeySize = 46;

/// version u8 | key (16) | policy u8 | location u64 | nonce (16) | block_count u32
inline Bytes encode_meta_key(const MetaKey& mk) {
  Writer w;
  w.u8(kMetaKeyVersion);
  w.raw(mk.key);
  w.u8(static_cast<std::uint8_t>(mk.policy));
  w.u64(mk.location.value);
  w.raw(mk.nonce);
  w.u32(mk.block_count);
  return std::move(w).take();
}

inline MetaKey decode_meta_key(ByteView data) {
  Reader r(data);
  if (r.u8() != kMetaKeyVersion) throw Error(ErrorCode::format, "unknown meta-key version");
  MetaKey mk;
  mk.key = r.array<16>();
  mk.policy = crypto::dpolicy_from_byte(r.u8());
  mk.location = NodeId{r.u64()};
  mk.nonce = r.array<16>();
  mk.block_count = r.u32();
  r.expect_done();
  return mk;
}

/// Safe-channel payload. Carries S' and N2, never S or N1.
struct ShareGrant {
  Digest file_id{};
  NodeId share_location;  // N2
  Digest shared_blob_id{};
  SymKey new_key{};       // S'

  friend bool operator==(const ShareGrant&, const ShareGrant&) = default;
};

inline constexpr std::string_view kGrantMagic = "MKG1";

/// "MKG1" | file_id | share_location u64 | shared_blob_id | new_key
inline Bytes encode_grant(const ShareGrant& g) {
  Writer w;
  w.raw(as_bytes(kGrantMagic));
  w.raw(g.file_id);
  w.u64(g.share_location.value);
  w.raw(g.shared_blob_id);
  w.raw(g.new_key);
  return std::move(w).take();
}

inline ShareGrant decode_grant(ByteView data) {
  Reader r(data);
  ByteView magic = r.raw(kGrantMagic.size());
  if (!std::equal(magic.begin(), magic.end(), kGrantMagic.begin())) {
    throw Error(ErrorCode::format, "not a share grant");
  }
  ShareGrant g;
  g.file_id = r.array<32>();
  g.share_location = NodeId{r.u64()};
  g.shared_blob_id = r.array<32>();
  g.new_key = r.array<16>();
  r.expect_done();
  return g;
}

struct StoreOptions {
  crypto::DPolicy policy = crypto::DPolicy::last;
  std::size_t max_file_size = crypto::kDefaultMaxMessage;
};

namespace detail {

inline const ledger::MetadataRecord* find_metadata(const Chain& chain,
                                                   const Digest& file_id,
                                                   std::vector<ledger::Record>& scratch) {
  scratch = ledger::find_records(
      chain, {.file_id = file_id, .kind = ledger::RecordKind::metadata});
  if (scratch.empty()) return nullptr;
  return &std::get<ledger::MetadataRecord>(scratch.front());
}

inline Bytes fetch(Network& net, NodeId requester, NodeId location,
                   const Digest& blob_id) {
  net.post({requester, location, netsim::FetchBlob{blob_id}});
  net.run_until_idle();
  auto replies = net.take_inbox(requester, [&](const netsim::Message& m) {
    const auto* r = std::get_if<netsim::BlobReply>(&m.payload);
    return r != nullptr && r->blob_id == blob_id;
  });
  if (replies.empty()) {
    throw Error(ErrorCode::routing, "no reply from node " + to_string(location));
  }
  auto& reply = std::get<netsim::BlobReply>(replies.back().payload);
  if (!reply.found) {
    throw Error(ErrorCode::not_found, "node " + to_string(location) +
                                          " does not hold blob " + to_hex(blob_id));
  }
  return std::move(reply.blob);
}

}  // namespace detail

/// Opens the owner's meta-key for file_id. Fails with not_found when the
/// chain has no record and with authorization when the envelope is not
/// addressed to this agent.
inline MetaKey open_meta_key(const UserAgent& agent, const Digest& file_id,
                             const Chain& chain) {
  std::vector<ledger::Record> scratch;
  const auto* record = detail::find_metadata(chain, file_id, scratch);
  if (record == nullptr) {
    throw Error(ErrorCode::not_found, "no metadata record for file " + to_hex(file_id));
  }
  try {
    return decode_meta_key(crypto::envelope_unwrap(agent.keypair, record->wrapped_key));
  } catch (const Error& e) {
    throw Error(ErrorCode::authorization,
                std::string("cannot open meta-key: ") + e.what());
  }
}

/// Encrypts under a fresh S, places the blob on a random storage node N1 and
/// records the meta-key envelope on the chain. Returns the file id (hash of
/// the stored blob). S is not retained anywhere in the agent.
inline Digest store_file(const UserAgent& owner, ByteView plaintext, Network& net,
                         Chain& chain, const StoreOptions& options = {}) {
  MetaKey mk;
  mk.policy = options.policy;
  net.rng().fill(mk.key);
  const auto c = crypto::pre_encrypt(mk.key, plaintext, options.policy, net.rng(),
                                     options.max_file_size);
  mk.nonce = c.nonce;
  mk.block_count = c.block_count;
  Bytes blob = crypto::serialize(c);
  const Digest file_id = crypto::hash(blob);

  std::set<NodeId> exclude = net.agents();
  exclude.insert(owner.id);
  mk.location = net.pick_node(exclude);

  net.post({owner.id, mk.location, netsim::StoreBlob{file_id, std::move(blob)}});
  net.run_until_idle();

  ledger::MetadataRecord record;
  record.file_id = file_id;
  record.owner_id = owner.id;
  record.content_hash = file_id;
  record.wrapped_key =
      crypto::envelope_wrap(owner.keypair.public_key, encode_meta_key(mk), net.rng());
  record.created_at = net.clock();
  chain = ledger::append(std::move(chain), {std::move(record)}, net.clock());

  net.annotate({.node = owner.id, .what = netsim::Learned::file_key, .file_id = file_id});
  net.annotate({.node = owner.id, .what = netsim::Learned::node_location,
                .location = mk.location});
  return file_id;
}

inline Bytes retrieve_file(const UserAgent& owner, const Digest& file_id, Network& net,
                           const Chain& chain) {
  const MetaKey mk = open_meta_key(owner, file_id, chain);
  Bytes blob = detail::fetch(net, owner.id, mk.location, file_id);
  if (crypto::hash(blob) != file_id) {
    throw Error(ErrorCode::corruption, "stored blob does not match its content hash");
  }
  try {
    return crypto::pre_decrypt(mk.key, crypto::deserialize_ciphertext(blob));
  } catch (const Error& e) {
    throw Error(ErrorCode::corruption, std::string("cannot decrypt file: ") + e.what());
  }
}

/// The six-step share:
///   1. open the meta-key for S and N1
///   2. draw S' and build the re-encryption key from S and S'
///   3. ask N1 to re-encrypt ...
///   4. ... and relocate the result to N2, drawn at random
///   5. send S' and N2 to the receiver over the safe channel
/// Step 6 is accept_share on the receiver side. A ShareRecord holding only
/// the grant hash is appended to the chain.
inline ShareGrant share_file(const UserAgent& owner, const Digest& file_id,
                             const Principal& receiver, Network& net, Chain& chain) {
  std::vector<ledger::Record> scratch;
  const auto* record = detail::find_metadata(chain, file_id, scratch);
  if (record == nullptr) {
    throw Error(ErrorCode::not_found, "no metadata record for file " + to_hex(file_id));
  }
  if (record->owner_id != owner.id) {
    throw Error(ErrorCode::authorization, "agent " + to_string(owner.id) +
                                              " does not own file " + to_hex(file_id));
  }
  const MetaKey mk = open_meta_key(owner, file_id, chain);
  const NodeId n1 = mk.location;

  ShareGrant grant;
  grant.file_id = file_id;
  net.rng().fill(grant.new_key);
  const crypto::BlockSet dset = crypto::designated_blocks(mk.policy, mk.block_count);
  auto rk = crypto::rekey(mk.key, mk.nonce, grant.new_key, dset, net.rng());

  grant.share_location = net.pick_node({owner.id, n1, receiver.id});
  net.rng().fill(grant.shared_blob_id);

  net.post({owner.id, n1,
            netsim::ReencryptAndForward{file_id, std::move(rk), grant.share_location,
                                        grant.shared_blob_id}});
  net.run_until_idle();
  auto failures = net.take_inbox(owner.id, [&](const netsim::Message& m) {
    const auto* r = std::get_if<netsim::BlobReply>(&m.payload);
    return r != nullptr && r->blob_id == file_id && !r->found;
  });
  if (!failures.empty()) {
    throw Error(ErrorCode::not_found,
                "storage node refused to re-encrypt file " + to_hex(file_id));
  }

  const Bytes grant_bytes = encode_grant(grant);
  net.post({owner.id, receiver.id,
            netsim::SafeChannel{
                crypto::envelope_wrap(receiver.public_key, grant_bytes, net.rng())}});
  net.run_until_idle();
  // The receiver can open what it was just sent.
  net.annotate({.node = receiver.id, .what = netsim::Learned::share_key, .file_id = file_id});
  net.annotate({.node = receiver.id, .what = netsim::Learned::node_location,
                .location = grant.share_location});

  ledger::ShareRecord share{file_id, owner.id, crypto::hash(grant_bytes), net.clock()};
  chain = ledger::append(std::move(chain), {share}, net.clock());
  return grant;
}

/// Sealed grants waiting in the receiver's inbox, oldest first.
inline std::vector<Bytes> take_grants(const UserAgent& receiver, Network& net) {
  std::vector<Bytes> out;
  for (auto& m : net.take_inbox(receiver.id, [](const netsim::Message& m) {
         return m.kind() == netsim::MessageKind::safe_channel;
       })) {
    out.push_back(std::move(std::get<netsim::SafeChannel>(m.payload).sealed));
  }
  return out;
}

inline ShareGrant open_grant(const UserAgent& receiver, ByteView sealed) {
  return decode_grant(crypto::envelope_unwrap(receiver.keypair, sealed));
}

/// Receiver side: open the grant, download the relocated copy from N2 and
/// decrypt it under S'.
inline Bytes accept_share(const UserAgent& receiver, ByteView sealed_grant, Network& net) {
  const ShareGrant grant = open_grant(receiver, sealed_grant);
  Bytes blob = detail::fetch(net, receiver.id, grant.share_location, grant.shared_blob_id);
  crypto::FileCiphertext c;
  try {
    c = crypto::deserialize_ciphertext(blob);
  } catch (const Error& e) {
    throw Error(ErrorCode::corruption, std::string("shared blob malformed: ") + e.what());
  }
  return crypto::pre_decrypt(grant.new_key, c);
}

}  // namespace metakey::protocol
