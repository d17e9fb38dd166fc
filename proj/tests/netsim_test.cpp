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

#include <gtest/gtest.h>

#include <array>

#include "metakey/netsim.hpp"
#include "metakey/stats.hpp"
#include "test_util.hpp"

namespace metakey::netsim {
namespace {

using metakey::testing::random_bytes;

TEST(NetworkTest, TooFewNodesIsAConfigurationError) {
  try {
    Network net(3, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::configuration);
  }
}

TEST(NetworkTest, FreshNetworksAreIdentical) {
  Network a(10, 42), b(10, 42);
  EXPECT_EQ(a.size(), 10u);
  EXPECT_EQ(a.clock(), 0u);
  EXPECT_EQ(a.trace().size(), 0u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_TRUE(a.node(NodeId{i}).blobs.empty());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(a.pick_node({}), b.pick_node({}));
}

TEST(PickNodeTest, ForcedChoice) {
  Network net(6, 1);
  std::set<NodeId> exclude{NodeId{0}, NodeId{1}, NodeId{2}, NodeId{4}, NodeId{5}};
  for (int i = 0; i < 20; ++i) EXPECT_EQ(net.pick_node(exclude), NodeId{3});
  exclude.insert(NodeId{3});
  EXPECT_THROW(net.pick_node(exclude), Error);
}

TEST(PickNodeTest, UniformOverCandidates) {
  Network net(10, 7);
  std::array<std::uint64_t, 10> counts{};
  for (int i = 0; i < 10000; ++i) ++counts[net.pick_node({}).value];
  EXPECT_GT(stats::chi_square_uniform(counts).p_value, 0.001);

  // Per-node tolerance of 5% relative to the uniform share, on enough draws
  // that a fair sampler clears it with overwhelming probability.
  counts.fill(0);
  for (int i = 0; i < 100000; ++i) ++counts[net.pick_node({}).value];
  for (auto c : counts) EXPECT_NEAR(static_cast<double>(c), 10000.0, 500.0);
}

TEST(PickNodeTest, NeverPicksExcluded) {
  Network net(10, 9);
  std::set<NodeId> exclude{NodeId{2}, NodeId{7}};
  for (int i = 0; i < 1000; ++i) EXPECT_FALSE(exclude.contains(net.pick_node(exclude)));
}

TEST(DeliveryTest, StoreThenFetchReturnsIdenticalBytes) {
  Network net(5, 1);
  Bytes blob = random_bytes(net.rng(), 500);
  Digest id = crypto::hash(blob);
  net.post({NodeId{0}, NodeId{3}, StoreBlob{id, blob}});
  net.post({NodeId{0}, NodeId{3}, FetchBlob{id}});
  auto delta = net.run_until_idle();
  ASSERT_EQ(delta.size(), 3u);
  EXPECT_TRUE(of_kind(delta[2], MessageKind::blob_reply));
  auto inbox = net.take_inbox(NodeId{0});
  ASSERT_EQ(inbox.size(), 1u);
  const auto& reply = std::get<BlobReply>(inbox[0].payload);
  EXPECT_TRUE(reply.found);
  EXPECT_EQ(reply.blob, blob);
  EXPECT_EQ(inbox[0].from_visible, NodeId{3});
  EXPECT_TRUE(net.take_inbox(NodeId{0}).empty());
}

TEST(DeliveryTest, FetchUnknownBlobRepliesNotFound) {
  Network net(4, 1);
  net.post({NodeId{1}, NodeId{2}, FetchBlob{Digest{}}});
  net.run_until_idle();
  auto inbox = net.take_inbox(NodeId{1});
  ASSERT_EQ(inbox.size(), 1u);
  EXPECT_FALSE(std::get<BlobReply>(inbox[0].payload).found);
}

TEST(DeliveryTest, UnknownDestinationRecordedAsRoutingError) {
  Network net(4, 1);
  net.post({NodeId{0}, NodeId{99}, FetchBlob{Digest{}}});
  auto delta = net.run_until_idle();
  ASSERT_EQ(delta.size(), 1u);
  EXPECT_EQ(delta[0].status, DeliveryStatus::routing_error);
}

TEST(DeliveryTest, SeqStrictlyIncreasingAndClockAdvances) {
  Network net(4, 1);
  for (int i = 0; i < 5; ++i) net.post({NodeId{0}, NodeId{1}, FetchBlob{Digest{}}});
  net.run_until_idle();
  const auto& ds = net.trace().deliveries();
  for (std::size_t i = 1; i < ds.size(); ++i) {
    EXPECT_GT(ds[i].message.seq, ds[i - 1].message.seq);
    EXPECT_GT(ds[i].clock, ds[i - 1].clock);
  }
  EXPECT_EQ(net.clock(), ds.size());
}

struct ProxyFixture {
  Network net{8, 3};
  crypto::SymKey s = net.rng().bytes<16>();
  crypto::SymKey s_prime = net.rng().bytes<16>();
  Bytes plaintext = random_bytes(net.rng(), 300);
  crypto::FileCiphertext original =
      crypto::pre_encrypt(s, plaintext, crypto::DPolicy::first_last, net.rng());
  Bytes blob = crypto::serialize(original);
  Digest blob_id = crypto::hash(blob);
  Digest shared_id = net.rng().bytes<32>();
  NodeId owner{0}, n1{4}, n2{6};

  void run_share() {
    net.post({owner, n1, StoreBlob{blob_id, blob}});
    auto rk = crypto::rekey(s, original.nonce, s_prime, original.dset, net.rng());
    net.post({owner, n1, ReencryptAndForward{blob_id, rk, n2, shared_id}});
    net.run_until_idle();
  }
};

TEST(ReencryptAndForwardTest, RelocatedBlobDiffersOnlyInDesignatedBlocksAndNonce) {
  ProxyFixture f;
  f.run_share();
  ASSERT_TRUE(f.net.node(f.n2).blobs.contains(f.shared_id));
  auto shared = crypto::deserialize_ciphertext(f.net.node(f.n2).blobs.at(f.shared_id));
  EXPECT_NE(shared.nonce, f.original.nonce);
  int differing = 0;
  for (std::size_t i = 0; i < shared.blocks.size(); ++i) {
    if (shared.blocks[i] != f.original.blocks[i]) ++differing;
  }
  EXPECT_EQ(differing, static_cast<int>(f.original.dset.size()));
  // N1 keeps its original copy.
  EXPECT_EQ(f.net.node(f.n1).blobs.at(f.blob_id), f.blob);
}

TEST(ReencryptAndForwardTest, TransferCarriesNoSender) {
  ProxyFixture f;
  f.run_share();
  auto transfers = f.net.trace().query(
      [](const Delivery& d) { return of_kind(d, MessageKind::transfer_blob); });
  ASSERT_EQ(transfers.size(), 1u);
  EXPECT_FALSE(transfers[0]->message.from_visible.has_value());
  EXPECT_EQ(transfers[0]->message.to, f.n2);
}

TEST(ReencryptAndForwardTest, ForwardedBlobDecryptsUnderNewKey) {
  ProxyFixture f;
  f.run_share();
  auto shared = crypto::deserialize_ciphertext(f.net.node(f.n2).blobs.at(f.shared_id));
  EXPECT_EQ(crypto::pre_decrypt(f.s_prime, shared), f.plaintext);
}

TEST(ReencryptAndForwardTest, UnknownBlobGetsErrorReply) {
  Network net(4, 1);
  crypto::ReEncryptionKey rk;
  rk.pads.emplace(2, crypto::Aes128::Block{});
  net.post({NodeId{0}, NodeId{1}, ReencryptAndForward{Digest{}, rk, NodeId{2}, Digest{}}});
  net.run_until_idle();
  auto inbox = net.take_inbox(NodeId{0});
  ASSERT_EQ(inbox.size(), 1u);
  EXPECT_FALSE(std::get<BlobReply>(inbox[0].payload).found);
  EXPECT_TRUE(net.node(NodeId{2}).blobs.empty());
}

TEST(TraceTest, SameSeedSameScriptSameExport) {
  ProxyFixture a, b;
  a.run_share();
  b.run_share();
  const std::string dump = export_trace_jsonl(a.net.trace());
  EXPECT_EQ(dump, export_trace_jsonl(b.net.trace()));
  auto line = nlohmann::json::parse(dump.substr(0, dump.find('\n')));
  EXPECT_EQ(line["kind"], "STORE_BLOB");
  EXPECT_EQ(line["to"], 4);
  EXPECT_EQ(line["from_visible"], 0);
  EXPECT_EQ(line["payload_digest"].get<std::string>().size(), 64u);
}

TEST(TraceTest, NamesNodeSeesDestinationField) {
  ProxyFixture f;
  f.run_share();
  auto naming_n2 = f.net.trace().query([&](const Delivery& d) { return names_node(d, f.n2); });
  ASSERT_EQ(naming_n2.size(), 1u);
  EXPECT_TRUE(of_kind(*naming_n2[0], MessageKind::reencrypt_and_forward));
}

}  // namespace
}  // namespace metakey::netsim
