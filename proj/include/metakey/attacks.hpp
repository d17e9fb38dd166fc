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

#include <array>
#include <bitset>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "metakey/crypto/pre.hpp"
#include "metakey/netsim.hpp"
#include "metakey/protocol.hpp"
#include "metakey/stats.hpp"

namespace metakey::attacks {

using crypto::Digest;

// ---- knowledge model -------------------------------------------------------

enum class Atom : std::uint8_t {
  has_blob_orig,
  has_blob_shared,
  has_key_s,
  has_key_s_prime,
  has_rk,
  has_loc_n1,
  has_loc_n2,
  has_pads_over_d,
  knows_plain,
};

inline constexpr std::size_t kAtomCount = 9;

inline std::string_view to_string(Atom a) {
  static constexpr std::array<std::string_view, kAtomCount> kNames = {
      "HasBlobOrig", "HasBlobShared", "HasKeyS",       "HasKeySPrime", "HasRK",
      "HasLocN1",    "HasLocN2",      "HasPadsOverD", "KnowsPlain"};
  return kNames[static_cast<std::size_t>(a)];
}

/// One atom of knowledge about one file.
struct Fact {
  Atom atom = Atom::has_blob_orig;
  Digest file_id{};

  friend auto operator<=>(const Fact&, const Fact&) = default;
};

using FactSet = std::set<Fact>;

struct Rule {
  std::string_view name;
  std::vector<Atom> premises;
  Atom conclusion;
};

/// R5 and R6 encode the open-fetch storage model: knowing where a blob is
/// means being able to download it. None of the rules yields HasKeyS.
inline const std::vector<Rule>& standard_rules() {
  static const std::vector<Rule> rules = {
      {"R1", {Atom::has_blob_orig, Atom::has_key_s}, Atom::knows_plain},
      {"R2", {Atom::has_blob_shared, Atom::has_key_s_prime}, Atom::knows_plain},
      {"R3", {Atom::has_blob_orig, Atom::has_rk}, Atom::has_blob_shared},
      {"R4", {Atom::has_blob_shared, Atom::has_rk}, Atom::has_blob_orig},
      {"R5", {Atom::has_loc_n1}, Atom::has_blob_orig},
      {"R6", {Atom::has_loc_n2}, Atom::has_blob_shared},
      {"R7", {Atom::has_blob_orig, Atom::has_blob_shared, Atom::has_key_s_prime},
       Atom::has_pads_over_d},
      {"R8", {Atom::has_blob_orig, Atom::has_pads_over_d}, Atom::knows_plain},
  };
  return rules;
}

/// Least fixed point of rules over facts. Rules fire per file.
inline FactSet closure(FactSet facts, const std::vector<Rule>& rules = standard_rules()) {
  std::set<Digest> files;
  for (const auto& f : facts) files.insert(f.file_id);
  bool changed = true;
  while (changed) {
    changed = false;
    for (const Digest& file : files) {
      for (const Rule& rule : rules) {
        bool fires = true;
        for (Atom p : rule.premises) {
          if (!facts.contains({p, file})) {
            fires = false;
            break;
          }
        }
        if (fires && facts.insert({rule.conclusion, file}).second) changed = true;
      }
    }
  }
  return facts;
}

// ---- roles and coalitions --------------------------------------------------

enum class Role : std::uint8_t { n1, n2, receiver };

inline std::string_view to_string(Role r) {
  switch (r) {
    case Role::n1: return "N1";
    case Role::n2: return "N2";
    case Role::receiver: return "Receiver";
  }
  return "?";
}

using Coalition = std::vector<Role>;

/// The seven non-empty coalitions over {N1, N2, Receiver}.
inline std::vector<Coalition> all_coalitions() {
  return {{Role::n1},
          {Role::n2},
          {Role::receiver},
          {Role::n1, Role::n2},
          {Role::n1, Role::receiver},
          {Role::n2, Role::receiver},
          {Role::n1, Role::n2, Role::receiver}};
}

inline std::string to_string(const Coalition& c) {
  std::string out = "{";
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i) out += ", ";
    out += to_string(c[i]);
  }
  return out + "}";
}

/// Who played which part in one store+share run. The owner knows all of
/// this; the harness uses it only to label trace entries.
struct ShareRun {
  Digest file_id{};
  Digest shared_blob_id{};
  NodeId owner;
  NodeId n1;
  NodeId n2;
  NodeId receiver;

  NodeId node_of(Role r) const {
    switch (r) {
      case Role::n1: return n1;
      case Role::n2: return n2;
      case Role::receiver: return receiver;
    }
    return receiver;
  }
};

inline ShareRun describe_share(const protocol::UserAgent& owner,
                               const protocol::ShareGrant& grant, NodeId receiver,
                               const ledger::Chain& chain) {
  return {grant.file_id,
          grant.shared_blob_id,
          owner.id,
          protocol::open_meta_key(owner, grant.file_id, chain).location,
          grant.share_location,
          receiver};
}

/// True if node x can tell where node y is from what x has been delivered,
/// or learned from envelopes it could open.
inline bool identifies(const netsim::Trace& trace, NodeId x, NodeId y) {
  if (x == y) return true;
  for (const auto& d : trace.deliveries()) {
    if (d.status == netsim::DeliveryStatus::delivered && d.message.to == x &&
        netsim::names_node(d, y)) {
      return true;
    }
  }
  for (const auto& a : trace.annotations()) {
    if (a.node == x && a.what == netsim::Learned::node_location && a.location == y) {
      return true;
    }
  }
  return false;
}

/// Initial facts of one node, read off the trace.
inline FactSet extract_facts(const netsim::Trace& trace, const ShareRun& run, NodeId node) {
  FactSet facts;
  auto add = [&](Atom a) { facts.insert({a, run.file_id}); };
  auto note_blob = [&](const Digest& id) {
    if (id == run.file_id) add(Atom::has_blob_orig);
    if (id == run.shared_blob_id) add(Atom::has_blob_shared);
  };
  for (const auto& d : trace.deliveries()) {
    if (d.status != netsim::DeliveryStatus::delivered || d.message.to != node) continue;
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, netsim::StoreBlob> ||
                        std::is_same_v<T, netsim::TransferBlob>) {
            note_blob(p.blob_id);
          } else if constexpr (std::is_same_v<T, netsim::BlobReply>) {
            if (p.found) note_blob(p.blob_id);
          } else if constexpr (std::is_same_v<T, netsim::ReencryptAndForward>) {
            if (p.blob_id == run.file_id) add(Atom::has_rk);
          }
        },
        d.message.payload);
  }
  for (const auto& a : trace.annotations()) {
    if (a.node != node || a.file_id != run.file_id) continue;
    if (a.what == netsim::Learned::share_key) add(Atom::has_key_s_prime);
    if (a.what == netsim::Learned::file_key) add(Atom::has_key_s);
  }
  if (identifies(trace, node, run.n1)) add(Atom::has_loc_n1);
  if (identifies(trace, node, run.n2)) add(Atom::has_loc_n2);
  return facts;
}

inline FactSet initial_facts(const netsim::Trace& trace, const ShareRun& run, Role role) {
  return extract_facts(trace, run, run.node_of(role));
}

struct CollusionReport {
  Coalition coalition;
  FactSet closure;
  bool s_derivable = false;
  bool plain_derivable = false;
};

inline CollusionReport analyse_coalition(const netsim::Trace& trace, const ShareRun& run,
                                         const Coalition& coalition) {
  FactSet pooled;
  for (Role r : coalition) pooled.merge(initial_facts(trace, run, r));
  CollusionReport report{coalition, closure(std::move(pooled)), false, false};
  report.s_derivable = report.closure.contains({Atom::has_key_s, run.file_id});
  report.plain_derivable = report.closure.contains({Atom::knows_plain, run.file_id});
  return report;
}

inline std::vector<CollusionReport> collusion_matrix(const netsim::Trace& trace,
                                                     const ShareRun& run) {
  std::vector<CollusionReport> out;
  for (const auto& c : all_coalitions()) out.push_back(analyse_coalition(trace, run, c));
  return out;
}

struct Feasibility {
  bool feasible = true;
  std::optional<std::string> missing_link;  // e.g. "N1 location"
};

/// A coalition can only form if every member can locate every other member
/// from its own deliveries. Reports the first member nobody else can reach,
/// in role order.
inline Feasibility coalition_feasibility(const netsim::Trace& trace, const ShareRun& run,
                                         const Coalition& coalition) {
  for (Role target : coalition) {
    for (Role member : coalition) {
      if (member == target) continue;
      if (!identifies(trace, run.node_of(member), run.node_of(target))) {
        return {false, std::string(to_string(target)) + " location"};
      }
    }
  }
  return {};
}

inline nlohmann::json matrix_to_json(const netsim::Trace& trace, const ShareRun& run) {
  nlohmann::json table = nlohmann::json::array();
  for (const auto& report : collusion_matrix(trace, run)) {
    nlohmann::json members = nlohmann::json::array();
    for (Role r : report.coalition) members.push_back(to_string(r));
    const Feasibility f = coalition_feasibility(trace, run, report.coalition);
    nlohmann::json closure_atoms = nlohmann::json::array();
    for (const auto& fact : report.closure) closure_atoms.push_back(to_string(fact.atom));
    table.push_back({{"coalition", members},
                     {"s_derivable", report.s_derivable},
                     {"plain_derivable", report.plain_derivable},
                     {"feasible", f.feasible},
                     {"missing_link", f.missing_link ? nlohmann::json(*f.missing_link)
                                                     : nlohmann::json(nullptr)},
                     {"closure", closure_atoms}});
  }
  return table;
}

// ---- statistical sanity ------------------------------------------------------

inline constexpr std::size_t kMinUniformityBytes = 64u << 10;

/// Chi-square p-value of the byte histogram against uniform.
inline double byte_uniformity(ByteView bytes) {
  if (bytes.size() < kMinUniformityBytes) {
    throw Error(ErrorCode::size, "uniformity test needs at least 64 KiB");
  }
  std::array<std::uint64_t, 256> counts{};
  for (std::uint8_t b : bytes) ++counts[b];
  return stats::chi_square_uniform(counts).p_value;
}

/// Same test over the block section of a ciphertext blob (header excluded).
inline double ciphertext_uniformity(ByteView blob) {
  const auto c = crypto::deserialize_ciphertext(blob);
  Bytes body;
  body.reserve(c.blocks.size() * 16);
  for (const auto& b : c.blocks) body.insert(body.end(), b.begin(), b.end());
  return byte_uniformity(body);
}

// ---- exhaustive key search on the toy cipher -------------------------------

/// Only ciphers with at most 16-bit keys can be searched exhaustively.
template <class C>
concept ToySearchable = crypto::BlockCipher<C> && (C::kKeySize <= 2);

/// All keys k for which keystream(k, c.nonce, i) matches what the pads and
/// S' imply for every designated block. S is always among them.
template <ToySearchable C>
std::vector<typename C::Key> toy_consistent_keys(
    const crypto::BasicFileCiphertext<C::kBlockSize>& c,
    const crypto::BasicFileCiphertext<C::kBlockSize>& c_shared,
    const crypto::BasicReEncryptionKey<C::kBlockSize>& rk,
    const typename C::Key& s_prime) {
  using Block = typename C::Block;
  if (c_shared.nonce != rk.new_nonce || c_shared.dset != c.dset ||
      c_shared.blocks.size() != c.blocks.size()) {
    throw Error(ErrorCode::invalid_argument, "ciphertexts and rekey do not belong together");
  }
  const C new_cipher(s_prime);
  std::vector<std::pair<std::uint32_t, Block>> targets;
  for (const auto& [i, pad] : rk.pads) {
    if ((c_shared.blocks[i - 1] ^ c.blocks[i - 1]) != pad) {
      throw Error(ErrorCode::invalid_argument, "pad does not match the ciphertext pair");
    }
    targets.emplace_back(i, pad ^ crypto::keystream<C>(new_cipher, rk.new_nonce, i));
  }
  std::vector<typename C::Key> out;
  constexpr std::uint64_t kSpace = std::uint64_t{1} << (8 * C::kKeySize);
  for (std::uint64_t k = 0; k < kSpace; ++k) {
    typename C::Key key{};
    for (std::size_t b = 0; b < C::kKeySize; ++b) {
      key[C::kKeySize - 1 - b] = static_cast<std::uint8_t>(k >> (8 * b));
    }
    const C candidate(key);
    bool consistent = true;
    for (const auto& [i, want] : targets) {
      if (crypto::keystream<C>(candidate, c.nonce, i) != want) {
        consistent = false;
        break;
      }
    }
    if (consistent) out.push_back(key);
  }
  return out;
}

template <ToySearchable C>
std::size_t toy_key_search(const crypto::BasicFileCiphertext<C::kBlockSize>& c,
                           const crypto::BasicFileCiphertext<C::kBlockSize>& c_shared,
                           const crypto::BasicReEncryptionKey<C::kBlockSize>& rk,
                           const typename C::Key& s_prime) {
  return toy_consistent_keys<C>(c, c_shared, rk, s_prime).size();
}

}  // namespace metakey::attacks
