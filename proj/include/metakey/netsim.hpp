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

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "metakey/crypto/hash.hpp"
#include "metakey/crypto/pre.hpp"
#include "metakey/node_id.hpp"
#include "metakey/random.hpp"

namespace metakey::netsim {

using crypto::Digest;

enum class MessageKind : std::uint8_t {
  store_blob,
  fetch_blob,
  blob_reply,
  reencrypt_and_forward,
  transfer_blob,
  safe_channel,
};

inline std::string_view to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::store_blob: return "STORE_BLOB";
    case MessageKind::fetch_blob: return "FETCH_BLOB";
    case MessageKind::blob_reply: return "BLOB_REPLY";
    case MessageKind::reencrypt_and_forward: return "REENCRYPT_AND_FORWARD";
    case MessageKind::transfer_blob: return "TRANSFER_BLOB";
    case MessageKind::safe_channel: return "SAFE_CHANNEL";
  }
  return "UNKNOWN";
}

struct StoreBlob {
  Digest blob_id{};
  Bytes blob;
};

struct FetchBlob {
  Digest blob_id{};
};

/// Reply to FETCH_BLOB, and the error reply to a failed REENCRYPT_AND_FORWARD.
struct BlobReply {
  Digest blob_id{};
  bool found = false;
  Bytes blob;
};

struct ReencryptAndForward {
  Digest blob_id{};
  crypto::ReEncryptionKey rk;
  NodeId dest;
  Digest shared_blob_id{};  // name the relocated copy is stored under
};

/// Relocation hop N1 -> N2. Always delivered without a sender.
struct TransferBlob {
  Digest blob_id{};
  Bytes blob;
};

/// Opaque envelope to the recipient's public key.
struct SafeChannel {
  Bytes sealed;
};

using Payload = std::variant<StoreBlob, FetchBlob, BlobReply, ReencryptAndForward,
                             TransferBlob, SafeChannel>;

struct Message {
  std::optional<NodeId> from_visible;
  NodeId to;
  Payload payload;
  std::uint64_t seq = 0;  // assigned at delivery

  MessageKind kind() const { return static_cast<MessageKind>(payload.index()); }
};

/// Canonical bytes of a payload: kind byte then fields. Used for the
/// payload digest in trace exports and for secrecy scans.
inline Bytes encode_payload(const Payload& payload) {
  Writer w;
  w.u8(static_cast<std::uint8_t>(payload.index()));
  std::visit(
      [&w](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, StoreBlob> || std::is_same_v<T, TransferBlob>) {
          w.raw(p.blob_id);
          w.var(p.blob);
        } else if constexpr (std::is_same_v<T, FetchBlob>) {
          w.raw(p.blob_id);
        } else if constexpr (std::is_same_v<T, BlobReply>) {
          w.raw(p.blob_id);
          w.u8(p.found ? 1 : 0);
          w.var(p.blob);
        } else if constexpr (std::is_same_v<T, ReencryptAndForward>) {
          w.raw(p.blob_id);
          w.var(crypto::serialize(p.rk));
          w.u64(p.dest.value);
          w.raw(p.shared_blob_id);
        } else {
          w.var(p.sealed);
        }
      },
      payload);
  return std::move(w).take();
}

/// Every node identity a recipient can read off a message in the clear.
inline std::vector<NodeId> visible_node_ids(const Message& m) {
  std::vector<NodeId> ids;
  if (m.from_visible) ids.push_back(*m.from_visible);
  if (const auto* r = std::get_if<ReencryptAndForward>(&m.payload)) {
    ids.push_back(r->dest);
  }
  return ids;
}

enum class DeliveryStatus : std::uint8_t { delivered, routing_error };

struct Delivery {
  Message message;
  std::uint64_t clock = 0;
  DeliveryStatus status = DeliveryStatus::delivered;
};

/// What an agent learned outside the clear message fields, e.g. by opening
/// an envelope addressed to it.
enum class Learned : std::uint8_t { node_location, share_key, file_key };

struct Annotation {
  std::uint64_t after_seq = 0;
  NodeId node{};
  Learned what = Learned::node_location;
  std::optional<NodeId> location = std::nullopt;  // for node_location
  Digest file_id{};                // for share_key / file_key
};

/// Append-only record of every delivery plus knowledge annotations.
class Trace {
 public:
  const std::vector<Delivery>& deliveries() const { return deliveries_; }
  const std::vector<Annotation>& annotations() const { return annotations_; }
  std::size_t size() const { return deliveries_.size(); }

  std::vector<const Delivery*> query(
      const std::function<bool(const Delivery&)>& predicate) const {
    std::vector<const Delivery*> out;
    for (const auto& d : deliveries_) {
      if (predicate(d)) out.push_back(&d);
    }
    return out;
  }

  void record(Delivery d) { deliveries_.push_back(std::move(d)); }
  void annotate(Annotation a) { annotations_.push_back(std::move(a)); }

 private:
  std::vector<Delivery> deliveries_;
  std::vector<Annotation> annotations_;
};

inline bool of_kind(const Delivery& d, MessageKind kind) {
  return d.message.kind() == kind;
}

inline bool names_node(const Delivery& d, NodeId id) {
  for (NodeId v : visible_node_ids(d.message)) {
    if (v == id) return true;
  }
  return false;
}

struct Node {
  NodeId id;
  std::map<Digest, Bytes> blobs;
  std::deque<Message> inbox;  // replies and safe-channel messages for agents
};

inline constexpr std::size_t kMinNodes = 4;

/// Single-threaded FIFO network of storage nodes. Nothing is lost, reordered
/// or delayed; the trace is a pure function of the seed and the posts.
class Network {
 public:
  Network(std::size_t n_nodes, std::uint64_t seed) : rng_(seed) {
    if (n_nodes < kMinNodes) {
      throw Error(ErrorCode::configuration,
                  "network needs at least 4 nodes (owner, receiver, N1, N2), got " +
                      std::to_string(n_nodes));
    }
    nodes_.reserve(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) nodes_.push_back(Node{NodeId{i}, {}, {}});
  }

  std::size_t size() const { return nodes_.size(); }
  bool contains(NodeId id) const { return id.value < nodes_.size(); }
  Drbg& rng() { return rng_; }
  std::uint64_t clock() const { return clock_; }
  void set_clock(std::uint64_t t) { clock_ = t; }
  const Trace& trace() const { return trace_; }

  const Node& node(NodeId id) const { return nodes_.at(checked(id)); }
  Node& node(NodeId id) { return nodes_.at(checked(id)); }

  /// Uniform draw over nodes outside exclude.
  NodeId pick_node(const std::set<NodeId>& exclude) {
    std::vector<NodeId> candidates;
    for (const auto& n : nodes_) {
      if (!exclude.contains(n.id)) candidates.push_back(n.id);
    }
    if (candidates.empty()) {
      throw Error(ErrorCode::configuration, "no candidate node left to pick");
    }
    return candidates[rng_.uniform(candidates.size())];
  }

  void post(Message m) { queue_.push_back(std::move(m)); }

  /// Delivers until the queue drains. The returned span covers this call's
  /// deliveries and stays valid until the next post.
  std::span<const Delivery> run_until_idle() {
    const std::size_t start = trace_.size();
    while (!queue_.empty()) {
      Message m = std::move(queue_.front());
      queue_.pop_front();
      deliver(std::move(m));
    }
    return std::span(trace_.deliveries()).subspan(start);
  }

  std::vector<Message> take_inbox(NodeId id) {
    return take_inbox(id, [](const Message&) { return true; });
  }

  /// Removes and returns the inbox messages matching pred, in arrival order.
  std::vector<Message> take_inbox(NodeId id,
                                  const std::function<bool(const Message&)>& pred) {
    auto& inbox = node(id).inbox;
    std::vector<Message> out;
    std::deque<Message> keep;
    for (auto& m : inbox) {
      if (pred(m)) {
        out.push_back(std::move(m));
      } else {
        keep.push_back(std::move(m));
      }
    }
    inbox = std::move(keep);
    return out;
  }

  /// Agents are user endpoints; storage placement never lands on them.
  void mark_agent(NodeId id) { agents_.insert(node(id).id); }
  const std::set<NodeId>& agents() const { return agents_; }

  void annotate(Annotation a) {
    a.after_seq = seq_;
    trace_.annotate(std::move(a));
  }

 private:
  std::size_t checked(NodeId id) const {
    if (!contains(id)) {
      throw Error(ErrorCode::routing, "unknown node " + to_string(id));
    }
    return static_cast<std::size_t>(id.value);
  }

  void deliver(Message m) {
    m.seq = ++seq_;
    ++clock_;
    if (!contains(m.to)) {
      trace_.record({std::move(m), clock_, DeliveryStatus::routing_error});
      return;
    }
    trace_.record({m, clock_, DeliveryStatus::delivered});
    handle(nodes_[m.to.value], std::move(m));
  }

  void handle(Node& self, Message m) {
    std::visit(
        [&](auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, StoreBlob> || std::is_same_v<T, TransferBlob>) {
            self.blobs[p.blob_id] = std::move(p.blob);
          } else if constexpr (std::is_same_v<T, FetchBlob>) {
            if (!m.from_visible) return;  // nowhere to reply
            BlobReply reply{p.blob_id, false, {}};
            if (auto it = self.blobs.find(p.blob_id); it != self.blobs.end()) {
              reply.found = true;
              reply.blob = it->second;
            }
            post({self.id, *m.from_visible, std::move(reply)});
          } else if constexpr (std::is_same_v<T, ReencryptAndForward>) {
            handle_reencrypt_and_forward(self, m.from_visible, p);
          } else {
            self.inbox.push_back(std::move(m));
          }
        },
        m.payload);
  }

  // N1's proxy step: transform its copy under rk and relocate the result to
  // dest anonymously. The original blob stays where it is.
  void handle_reencrypt_and_forward(Node& self, std::optional<NodeId> requester,
                                    const ReencryptAndForward& req) {
    auto it = self.blobs.find(req.blob_id);
    std::optional<Bytes> transformed;
    if (it != self.blobs.end()) {
      try {
        auto c = crypto::deserialize_ciphertext(it->second);
        transformed = crypto::serialize(crypto::reencrypt(req.rk, std::move(c)));
      } catch (const Error&) {
        transformed.reset();
      }
    }
    if (!transformed) {
      if (requester) post({self.id, *requester, BlobReply{req.blob_id, false, {}}});
      return;
    }
    post({std::nullopt, req.dest, TransferBlob{req.shared_blob_id, std::move(*transformed)}});
  }

  std::vector<Node> nodes_;
  std::set<NodeId> agents_;
  std::deque<Message> queue_;
  Drbg rng_;
  std::uint64_t clock_ = 0;
  std::uint64_t seq_ = 0;
  Trace trace_;
};

/// One JSON object per delivery; blobs are summarized by size and digest.
inline nlohmann::json delivery_to_json(const Delivery& d) {
  const Message& m = d.message;
  nlohmann::json j;
  j["seq"] = m.seq;
  j["kind"] = to_string(m.kind());
  j["to"] = m.to.value;
  if (m.from_visible) j["from_visible"] = m.from_visible->value;
  j["status"] = d.status == DeliveryStatus::delivered ? "delivered" : "routing_error";
  j["payload_digest"] = to_hex(crypto::hash(encode_payload(m.payload)));
  nlohmann::json summary = nlohmann::json::object();
  std::visit(
      [&summary](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, StoreBlob> || std::is_same_v<T, TransferBlob>) {
          summary["blob_id"] = to_hex(p.blob_id);
          summary["size"] = p.blob.size();
        } else if constexpr (std::is_same_v<T, FetchBlob>) {
          summary["blob_id"] = to_hex(p.blob_id);
        } else if constexpr (std::is_same_v<T, BlobReply>) {
          summary["blob_id"] = to_hex(p.blob_id);
          summary["found"] = p.found;
          summary["size"] = p.blob.size();
        } else if constexpr (std::is_same_v<T, ReencryptAndForward>) {
          summary["blob_id"] = to_hex(p.blob_id);
          summary["dest"] = p.dest.value;
          summary["shared_blob_id"] = to_hex(p.shared_blob_id);
          summary["pads"] = p.rk.pads.size();
        } else {
          summary["size"] = p.sealed.size();
        }
      },
      m.payload);
  j["summary"] = std::move(summary);
  return j;
}

inline std::string export_trace_jsonl(const Trace& trace) {
  std::string out;
  for (const auto& d : trace.deliveries()) {
    out += delivery_to_json(d).dump();
    out += '\n';
  }
  return out;
}

}  // namespace metakey::netsim
