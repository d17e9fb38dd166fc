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

// Acceptance run: one PASS/FAIL line per criterion. Thresholds are fixed
// here, not tuned per run. --only N runs a single criterion.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "metakey/attacks.hpp"
#include "metakey/crypto/toy_cipher.hpp"
#include "metakey/ledger.hpp"
#include "metakey/protocol.hpp"
#include "test_util.hpp"

namespace {

using namespace metakey;
using crypto::Digest;
using metakey::testing::random_bytes;
using metakey::testing::random_message;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 3) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(precision);
  ss << v;
  return ss.str();
}

// ---- 1 -------------------------------------------------------------------------

Outcome pre_correctness() {
  constexpr int kTriples = 1000;
  constexpr double kBudgetSeconds = 30.0;
  const auto start = std::chrono::steady_clock::now();
  Drbg rng(1001);
  int ok = 0, total = 0;
  for (auto policy : {crypto::DPolicy::last, crypto::DPolicy::first_last, crypto::DPolicy::all}) {
    for (int t = 0; t < kTriples; ++t) {
      const Bytes m = random_message(rng, 64u << 10);
      const auto s = rng.bytes<16>();
      const auto s_prime = rng.bytes<16>();
      const auto c = crypto::pre_encrypt(s, m, policy, rng);
      const auto rk = crypto::rekey(s, c.nonce, s_prime, c.dset, rng);
      ++total;
      if (crypto::pre_decrypt(s_prime, crypto::reencrypt(rk, c)) == m) ++ok;
    }
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {ok == total && secs < kBudgetSeconds,
          std::to_string(ok) + "/" + std::to_string(total) + " round trips over 3 policies in " +
              fmt(secs, 2) + " s (budget 30 s)"};
}

// ---- 2 -------------------------------------------------------------------------

Outcome primitive_vectors() {
  struct AesVector {
    const char* key;
    const char* pt;
    const char* ct;
  };
  const AesVector aes[] = {
      {"2b7e151628aed2a6abf7158809cf4f3c", "3243f6a8885a308d313198a2e0370734",
       "3925841d02dc09fbdc118597196a0b32"},
      {"000102030405060708090a0b0c0d0e0f", "00112233445566778899aabbccddeeff",
       "69c4e0d86a7b0430d8cdb78070b4c55a"},
      {"00000000000000000000000000000000", "00000000000000000000000000000000",
       "66e94bd4ef8a2c3b884cfa59ca342b2e"},
  };
  struct HashVector {
    std::string msg;
    const char* digest;
  };
  const HashVector sha[] = {
      {"", "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"},
      {"abc", "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"},
      {"abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq",
       "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1"},
      {std::string(1000000, 'a'),
       "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0"},
  };
  int ok = 0, total = 0;
  for (const auto& v : aes) {
    const crypto::Aes128 cipher(array_from_hex<16>(v.key));
    ++total;
    if (to_hex(cipher.encrypt(array_from_hex<16>(v.pt))) == v.ct &&
        to_hex(cipher.decrypt(array_from_hex<16>(v.ct))) == v.pt) {
      ++ok;
    }
  }
  for (const auto& v : sha) {
    ++total;
    if (to_hex(crypto::hash(as_bytes(v.msg))) == v.digest) ++ok;
  }
  return {ok == total, std::to_string(ok) + "/" + std::to_string(total) +
                           " AES-128 and SHA-256 published vectors"};
}

// ---- shared protocol run ---------------------------------------------------------

struct Run {
  explicit Run(std::uint64_t seed)
      : net(10, seed),
        owner(protocol::make_agent(NodeId{0}, net)),
        receiver(protocol::make_agent(NodeId{1}, net)) {
    plaintext = random_message(net.rng(), 16u << 10);
    file_id = protocol::store_file(owner, plaintext, net, chain);
    share_start = net.trace().size();
    grant = protocol::share_file(owner, file_id, protocol::principal_of(receiver), net, chain);
    share_end = net.trace().size();
    for (const auto& sealed : protocol::take_grants(receiver, net)) {
      recovered = protocol::accept_share(receiver, sealed, net);
    }
    run = attacks::describe_share(owner, grant, receiver.id, chain);
    s = protocol::open_meta_key(owner, file_id, chain).key;
  }

  netsim::Network net;
  ledger::Chain chain = ledger::genesis();
  protocol::UserAgent owner;
  protocol::UserAgent receiver;
  Bytes plaintext;
  Bytes recovered;
  Digest file_id{};
  protocol::ShareGrant grant;
  attacks::ShareRun run;
  crypto::SymKey s{};
  std::size_t share_start = 0;
  std::size_t share_end = 0;
};

// ---- 3 -------------------------------------------------------------------------

Outcome end_to_end() {
  using netsim::MessageKind;
  const std::vector<MessageKind> expected = {MessageKind::reencrypt_and_forward,
                                             MessageKind::transfer_blob,
                                             MessageKind::safe_channel};
  int recovered = 0, sequence_ok = 0;
  constexpr int kRuns = 100;
  for (int seed = 1; seed <= kRuns; ++seed) {
    Run r(static_cast<std::uint64_t>(seed));
    if (r.recovered == r.plaintext) ++recovered;
    std::vector<MessageKind> kinds;
    for (std::size_t i = r.share_start; i < r.share_end; ++i) {
      kinds.push_back(r.net.trace().deliveries()[i].message.kind());
    }
    if (kinds == expected) ++sequence_ok;
  }
  return {recovered == kRuns && sequence_ok == kRuns,
          std::to_string(recovered) + "/100 plaintexts recovered, " +
              std::to_string(sequence_ok) + "/100 share phases exactly " +
              "REENCRYPT_AND_FORWARD, TRANSFER_BLOB, SAFE_CHANNEL"};
}

// ---- 4 -------------------------------------------------------------------------

unsigned mask_of(const attacks::FactSet& s) {
  unsigned m = 0;
  for (const auto& f : s) m |= 1u << static_cast<unsigned>(f.atom);
  return m;
}

/// Least fixed point by brute force: intersection of all closed supersets.
unsigned oracle_closure(unsigned start) {
  constexpr unsigned kAll = (1u << attacks::kAtomCount) - 1;
  unsigned meet = kAll;
  for (unsigned sup = 0; sup <= kAll; ++sup) {
    if ((sup & start) != start) continue;
    bool closed = true;
    for (const auto& rule : attacks::standard_rules()) {
      bool fires = true;
      for (auto p : rule.premises) fires = fires && (sup >> static_cast<unsigned>(p) & 1u);
      if (fires && !(sup >> static_cast<unsigned>(rule.conclusion) & 1u)) closed = false;
    }
    if (closed) meet &= sup;
  }
  return meet;
}

Outcome collusion_matrix() {
  using enum attacks::Atom;
  auto bits = [](std::initializer_list<attacks::Atom> atoms) {
    unsigned m = 0;
    for (auto a : atoms) m |= 1u << static_cast<unsigned>(a);
    return m;
  };
  // Worked out by hand from the rule list, in all_coalitions() order.
  const unsigned n1_only = bits({has_blob_orig, has_blob_shared, has_rk, has_loc_n1, has_loc_n2});
  const unsigned receiver_side = bits({has_blob_shared, has_key_s_prime, has_loc_n2, knows_plain});
  const unsigned n1_receiver = n1_only | bits({has_key_s_prime, has_pads_over_d, knows_plain});
  const std::vector<unsigned> hand = {n1_only,
                                      bits({has_blob_shared, has_loc_n2}),
                                      receiver_side,
                                      n1_only,
                                      n1_receiver,
                                      receiver_side,
                                      n1_receiver};
  const std::vector<bool> plain = {false, false, true, false, true, true, true};
  const std::vector<std::optional<std::string>> blocked = {
      std::nullopt, std::nullopt, std::nullopt, "N1 location", "N1 location", std::nullopt,
      "N1 location"};

  constexpr int kRuns = 20;
  int mismatches = 0;
  std::string first;
  for (int seed = 1; seed <= kRuns; ++seed) {
    Run r(static_cast<std::uint64_t>(seed) + 500);
    const auto& trace = r.net.trace();
    const auto reports = attacks::collusion_matrix(trace, r.run);
    const auto coalitions = attacks::all_coalitions();
    for (std::size_t i = 0; i < coalitions.size(); ++i) {
      attacks::FactSet pooled;
      for (auto role : coalitions[i]) pooled.merge(attacks::initial_facts(trace, r.run, role));
      const unsigned got = mask_of(reports[i].closure);
      const auto feas = attacks::coalition_feasibility(trace, r.run, coalitions[i]);
      const bool row_ok = !reports[i].s_derivable && reports[i].plain_derivable == plain[i] &&
                          got == hand[i] && got == oracle_closure(mask_of(pooled)) &&
                          feas.feasible == !blocked[i].has_value() &&
                          feas.missing_link == blocked[i];
      if (!row_ok) {
        ++mismatches;
        if (first.empty()) first = " first mismatch " + attacks::to_string(coalitions[i]);
      }
    }
  }
  return {mismatches == 0, std::to_string(kRuns * 7 - mismatches) + "/" +
                               std::to_string(kRuns * 7) +
                               " coalition rows match hand and brute-force oracles" + first};
}

// ---- 5 -------------------------------------------------------------------------

Outcome trace_secrecy() {
  int n1_leaks = 0, s_leaks = 0, s_prime_clear = 0, s_prime_unwrapped = 0;
  constexpr int kRuns = 100;
  for (int seed = 1; seed <= kRuns; ++seed) {
    Run r(static_cast<std::uint64_t>(seed) + 1000);
    const NodeId n1 = r.run.n1;
    const NodeId n2 = r.run.n2;
    const auto& s_prime = r.grant.new_key;
    bool wrapped_seen = false;
    for (const auto& d : r.net.trace().deliveries()) {
      const Bytes payload = netsim::encode_payload(d.message.payload);
      if ((d.message.to == r.receiver.id || d.message.to == n2) && netsim::names_node(d, n1)) {
        ++n1_leaks;
      }
      if (contains_bytes(payload, r.s)) ++s_leaks;
      if (contains_bytes(payload, s_prime)) ++s_prime_clear;
      if (const auto* sc = std::get_if<netsim::SafeChannel>(&d.message.payload)) {
        const auto g = protocol::open_grant(r.receiver, sc->sealed);
        if (g.new_key == s_prime && d.message.to == r.receiver.id) wrapped_seen = true;
        if (g.share_location == n1) ++n1_leaks;
      }
    }
    if (wrapped_seen) ++s_prime_unwrapped;
  }
  return {n1_leaks == 0 && s_leaks == 0 && s_prime_clear == 0 && s_prime_unwrapped == kRuns,
          std::to_string(n1_leaks) + " N1 ids to Receiver/N2, " + std::to_string(s_leaks) +
              " clear S, " + std::to_string(s_prime_clear) + " clear S'; S' inside " +
              "receiver envelope in " + std::to_string(s_prime_unwrapped) + "/100 runs"};
}

// ---- 6 -------------------------------------------------------------------------

Outcome ledger_tamper() {
  Drbg rng(6006);
  ledger::Chain chain = ledger::genesis();
  for (std::uint64_t i = 1; i < 100; ++i) {
    ledger::MetadataRecord m{rng.bytes<32>(), NodeId{rng.uniform(8)}, rng.bytes<32>(),
                             random_bytes(rng, 110), i};
    std::vector<ledger::Record> recs{m};
    if (rng.uniform(2) == 0) recs.push_back(ledger::ShareRecord{m.file_id, m.owner_id,
                                                                 rng.bytes<32>(), i});
    chain = ledger::append(std::move(chain), std::move(recs), i);
  }
  std::vector<Bytes> encoded;
  std::size_t total_bits = 0;
  for (const auto& b : chain.blocks) {
    encoded.push_back(ledger::encode_block(b));
    total_bits += encoded.back().size() * 8;
  }
  constexpr int kFlips = 1000;
  int detected = 0, located = 0;
  for (int t = 0; t < kFlips; ++t) {
    // uniform over every bit of the serialized chain
    std::size_t bit = rng.uniform(total_bits);
    std::size_t k = 0;
    while (bit >= encoded[k].size() * 8) bit -= encoded[k++].size() * 8;
    Bytes bytes = encoded[k];
    bytes[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    ledger::Chain tampered = chain;
    try {
      tampered.blocks[k] = ledger::decode_block(bytes);
    } catch (const Error&) {
      ++detected;
      ++located;
      continue;
    }
    if (auto f = ledger::verify(tampered)) {
      ++detected;
      if (f->height == k || f->height == k + 1) ++located;
    }
  }
  return {detected == kFlips && located * 100 >= kFlips * 99,
          std::to_string(detected) + "/1000 flips detected, " + std::to_string(located) +
              "/1000 at the flipped height or the next (need >= 990)"};
}

// ---- 7 -------------------------------------------------------------------------

Outcome aont_all_or_nothing() {
  using Block = crypto::Aes128::Block;
  Drbg rng(7007);
  constexpr int kFiles = 100;
  constexpr int kFlipsPerFile = 20;
  int cases = 0, all_changed = 0;
  for (int f = 0; f < kFiles; ++f) {
    const Bytes m = random_bytes(rng, 16 + rng.uniform(4096));
    const auto padded = crypto::pad<16>(m, crypto::kDefaultMaxMessage);
    const auto pseudo = crypto::aont_forward<crypto::Aes128>(padded, rng.bytes<16>());
    const std::size_t s = pseudo.size() - 1;
    for (int t = 0; t < kFlipsPerFile; ++t) {
      auto flipped = pseudo;
      const std::size_t block = rng.uniform(s);  // 0-based index of blocks 1..s
      const std::size_t bit = rng.uniform(128);
      flipped[block][bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
      const std::vector<Block> recovered = crypto::aont_inverse<crypto::Aes128>(flipped);
      bool every = recovered.size() == padded.size();
      for (std::size_t i = 0; every && i < padded.size(); ++i) every = recovered[i] != padded[i];
      ++cases;
      if (every) ++all_changed;
    }
  }
  return {all_changed == cases, std::to_string(all_changed) + "/" + std::to_string(cases) +
                                    " sampled (file, block, bit) flips changed every block"};
}

// ---- 8 -------------------------------------------------------------------------

Outcome toy_non_identifiability() {
  using Toy = crypto::ToyCipher16;
  Drbg rng(8008);
  constexpr int kInstances = 100;
  int ambiguous = 0, contains_s = 0;
  for (int t = 0; t < kInstances; ++t) {
    Toy::Key s, s_prime;
    rng.fill(s);
    rng.fill(s_prime);
    const Bytes m = random_bytes(rng, 1 + rng.uniform(64));
    const auto c = crypto::pre_encrypt<Toy>(s, m, crypto::DPolicy::last, rng);
    const auto rk = crypto::rekey<Toy>(s, c.nonce, s_prime, c.dset, rng);
    const auto c_shared = crypto::reencrypt(rk, c);
    const auto keys = attacks::toy_consistent_keys<Toy>(c, c_shared, rk, s_prime);
    if (keys.size() > 1) ++ambiguous;
    if (std::find(keys.begin(), keys.end(), s) != keys.end()) ++contains_s;
  }
  return {ambiguous * 100 >= kInstances * 95,
          std::to_string(ambiguous) + "/100 instances with > 1 consistent key (need >= 95); " +
              "S among candidates in " + std::to_string(contains_s) + "/100"};
}

// ---- 9 -------------------------------------------------------------------------

Outcome uniformity() {
  Drbg rng(9009);
  const Bytes zeros(1u << 20, 0);
  const auto s = rng.bytes<16>();
  const auto c = crypto::pre_encrypt(s, zeros, crypto::DPolicy::last, rng);
  const auto rk = crypto::rekey(s, c.nonce, rng.bytes<16>(), c.dset, rng);
  const double p_orig = attacks::ciphertext_uniformity(crypto::serialize(c));
  const double p_shared =
      attacks::ciphertext_uniformity(crypto::serialize(crypto::reencrypt(rk, c)));
  return {p_orig > 0.001 && p_shared > 0.001,
          "p = " + fmt(p_orig, 4) + " original, " + fmt(p_shared, 4) + " transformed"};
}

// ---- 10 ------------------------------------------------------------------------

std::string run_capture(const std::string& cmd, int& status) {
  std::string out;
  std::FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) {
    status = -1;
    return out;
  }
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  status = pclose(pipe);
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome demo_determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("metakey-accept-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  std::string out[2], trace[2];
  int status[2];
  for (int i = 0; i < 2; ++i) {
    const fs::path tp = dir / ("trace" + std::to_string(i) + ".jsonl");
    out[i] = run_capture(std::string("'") + METAKEY_CLI_PATH + "' demo --seed 42 --json-trace '" +
                             tp.string() + "'",
                         status[i]);
    trace[i] = slurp(tp);
  }
  fs::remove_all(dir);
  const bool ok = status[0] == 0 && status[1] == 0 && !out[0].empty() && out[0] == out[1] &&
                  !trace[0].empty() && trace[0] == trace[1];
  return {ok, "two runs: stdout " + std::to_string(out[0].size()) + " B " +
                  (out[0] == out[1] ? "identical" : "differs") + ", trace dump " +
                  std::to_string(trace[0].size()) + " B " +
                  (trace[0] == trace[1] ? "identical" : "differs")};
}

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome()> check;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metakey acceptance run"};
  int only = 0;
  app.add_option("--only", only, "run a single criterion (1-10)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {1, "PRE round trip under every policy", pre_correctness},
      {2, "primitive test vectors", primitive_vectors},
      {3, "end-to-end store, share, accept", end_to_end},
      {4, "collusion matrix and feasibility", collusion_matrix},
      {5, "trace secrecy", trace_secrecy},
      {6, "ledger tamper evidence", ledger_tamper},
      {7, "AONT all-or-nothing", aont_all_or_nothing},
      {8, "toy-cipher key non-identifiability", toy_non_identifiability},
      {9, "ciphertext byte uniformity", uniformity},
      {10, "demo determinism", demo_determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << c.id << "] " << c.title << ": "
              << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
