#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hbft/chain_store.hpp"
#include "validation_oracle.hpp"

using namespace hbft;

namespace {

struct Fixture {
    Topology topo = Topology::uniform(3, 4);
    BlockStore store;
    ChainStore chain{topo, 6};
    uint64_t seq = 1;

    Block add_block(ClusterId origin, ViewId view, const Digest& parent, int txs = 1,
                    uint64_t client = 0) {
        std::vector<Transaction> list;
        for (int i = 0; i < txs; ++i) {
            Bytes key = to_bytes("k" + std::to_string(seq));
            Bytes value = to_bytes("v" + std::to_string(seq));
            list.push_back(Transaction::make(client ? client : origin + 1, seq++,
                                             make_kv_payload(key, value)));
        }
        Block b = Block::make(origin, view, parent, std::move(list));
        store.put(b, LockCertificate{b.digest, origin, view, {}}, 0);
        chain.add_pending(origin, view, b.digest);
        chain.credit_origin(b.digest, origin);
        return b;
    }

    void make_durable(const Digest& d) {
        for (ClusterId c = 1; c < 3; ++c)
            for (uint32_t k = 0; k < 2; ++k) chain.record_durability(d, c, k);
    }
};

}  // namespace

TEST_CASE("validate_superblock: order and durability conditions") {
    Fixture fx;
    Block b1 = fx.add_block(1, 1, Block::genesis_digest(1));
    Block b2 = fx.add_block(1, 2, b1.digest);
    fx.make_durable(b1.digest);
    fx.make_durable(b2.digest);

    SuperBlock good = SuperBlock::make(SuperBlock::genesis().digest, 1, 1,
                                       {BlockRef{1, b1.digest}, BlockRef{1, b2.digest}});
    CHECK(fx.chain.validate_superblock(good, fx.store).ok);

    SuperBlock reordered = SuperBlock::make(
        SuperBlock::genesis().digest, 1, 1,
        {BlockRef{1, b2.digest}, BlockRef{1, b1.digest}});
    CHECK_FALSE(fx.chain.validate_superblock(reordered, fx.store).ok);

    // A block stored only in its origin cluster is not durable at F=1.
    Block b3 = fx.add_block(2, 1, Block::genesis_digest(2));
    SuperBlock thin = SuperBlock::make(SuperBlock::genesis().digest, 1, 1,
                                       {BlockRef{2, b3.digest}});
    auto v = fx.chain.validate_superblock(thin, fx.store);
    CHECK_FALSE(v.ok);
    CHECK(v.reason.find("durability") != std::string::npos);
}

TEST_CASE("validate_superblock: structural guards") {
    Fixture fx;
    Block b1 = fx.add_block(0, 1, Block::genesis_digest(0));
    fx.make_durable(b1.digest);

    SuperBlock wrong_prev =
        SuperBlock::make(hash("bad"), 1, 1, {BlockRef{0, b1.digest}});
    CHECK_FALSE(fx.chain.validate_superblock(wrong_prev, fx.store).ok);

    SuperBlock dup = SuperBlock::make(SuperBlock::genesis().digest, 1, 1,
                                      {BlockRef{0, b1.digest}, BlockRef{0, b1.digest}});
    CHECK_FALSE(fx.chain.validate_superblock(dup, fx.store).ok);

    SuperBlock unknown = SuperBlock::make(SuperBlock::genesis().digest, 1, 1,
                                          {BlockRef{0, hash("ghost")}});
    CHECK_FALSE(fx.chain.validate_superblock(unknown, fx.store).ok);

    // Gap: skipping the first pending block of a cluster.
    Block b2 = fx.add_block(0, 2, b1.digest);
    fx.make_durable(b2.digest);
    SuperBlock gap =
        SuperBlock::make(SuperBlock::genesis().digest, 1, 1, {BlockRef{0, b2.digest}});
    CHECK_FALSE(fx.chain.validate_superblock(gap, fx.store).ok);
}

TEST_CASE("select_blocks: balanced round robin over durable prefixes") {
    Fixture fx;
    Block a = fx.add_block(0, 1, Block::genesis_digest(0));
    Block b = fx.add_block(0, 2, a.digest);
    Block c = fx.add_block(1, 1, Block::genesis_digest(1));
    Block d = fx.add_block(2, 1, Block::genesis_digest(2));
    for (const auto& blk : {a, b, c, d}) fx.make_durable(blk.digest);

    ChainStore chain3(fx.topo, 3);
    for (const auto& blk : {a, b, c, d}) {
        chain3.add_pending(blk.origin, blk.local_view, blk.digest);
        chain3.credit_origin(blk.digest, blk.origin);
        for (ClusterId cc = 1; cc < 3; ++cc)
            for (uint32_t k = 0; k < 2; ++k) chain3.record_durability(blk.digest, cc, k);
    }
    chain3.record_durability(a.digest, 0, 0);

    // k_max 3: one from each cluster, oldest first.
    auto picked = chain3.select_blocks(fx.store, {});
    REQUIRE(picked.size() == 3);
    CHECK(picked[0].digest == a.digest);
    CHECK(picked[1].digest == c.digest);
    CHECK(picked[2].digest == d.digest);

    // k_max 6: all four fit; cluster 0 contributes both in order.
    auto all = fx.chain.select_blocks(fx.store, {});
    REQUIRE(all.size() == 4);
    CHECK(all[0].digest == a.digest);
    CHECK(all[3].digest == b.digest);

    // Single cluster pending, no balancing needed.
    ChainStore solo(fx.topo, 6);
    solo.add_pending(0, 1, a.digest);
    solo.add_pending(0, 2, b.digest);
    for (const auto& blk : {a, b}) {
        solo.credit_origin(blk.digest, 0);
        for (ClusterId cc = 1; cc < 3; ++cc)
            for (uint32_t k = 0; k < 2; ++k) solo.record_durability(blk.digest, cc, k);
    }
    auto two = solo.select_blocks(fx.store, {});
    REQUIRE(two.size() == 2);
    CHECK(two[0].digest == a.digest);
    CHECK(two[1].digest == b.digest);
}

TEST_CASE("select_blocks: non-durable candidates cut the prefix") {
    Fixture fx;
    Block a = fx.add_block(0, 1, Block::genesis_digest(0));
    Block b = fx.add_block(0, 2, a.digest);
    fx.make_durable(b.digest);  // b durable, a NOT
    auto picked = fx.chain.select_blocks(fx.store, {});
    // a blocks the prefix; b cannot be taken ahead of it.
    CHECK(picked.empty());
}

TEST_CASE("append_and_execute: sequential semantics and dedup") {
    Fixture fx;
    // Block with two writes (tx1, tx2) then block with one (tx3).
    Bytes k = to_bytes("K");
    Transaction tx1 = Transaction::make(5, 1, make_kv_payload(k, to_bytes("first")));
    Transaction tx2 = Transaction::make(5, 2, make_kv_payload(k, to_bytes("second")));
    Transaction tx3 = Transaction::make(6, 1, make_kv_payload(to_bytes("K2"), to_bytes("z")));
    Block ba = Block::make(0, 1, Block::genesis_digest(0), {tx1, tx2});
    Block bb = Block::make(1, 1, Block::genesis_digest(1), {tx3});
    fx.store.put(ba, LockCertificate{ba.digest, 0, 1, {}}, 0);
    fx.store.put(bb, LockCertificate{bb.digest, 1, 1, {}}, 0);
    fx.chain.add_pending(0, 1, ba.digest);
    fx.chain.add_pending(1, 1, bb.digest);

    SuperBlock sb = SuperBlock::make(SuperBlock::genesis().digest, 1, 1,
                                     {BlockRef{0, ba.digest}, BlockRef{1, bb.digest}});
    auto executed = fx.chain.append_and_execute(sb, std::nullopt, fx.store);
    REQUIRE(executed.size() == 3);
    CHECK(executed[0].txid == tx1.txid);
    CHECK(executed[1].txid == tx2.txid);
    CHECK(executed[2].txid == tx3.txid);
    for (const auto& e : executed) CHECK(e.status == 0);
    // Two writes to one key: last writer wins under the total order.
    CHECK(fx.chain.kv().at(k) == to_bytes("second"));
    CHECK(fx.chain.executed_height(tx1.txid).value() == 1);
    CHECK(fx.chain.pending_blocks(0).empty());

    // Retransmission: the same txid in a later block executes once.
    Block bc = Block::make(2, 1, Block::genesis_digest(2), {tx1});
    fx.store.put(bc, LockCertificate{bc.digest, 2, 1, {}}, 0);
    fx.chain.add_pending(2, 1, bc.digest);
    SuperBlock sb2 = SuperBlock::make(sb.digest, 2, 2, {BlockRef{2, bc.digest}});
    auto executed2 = fx.chain.append_and_execute(sb2, std::nullopt, fx.store);
    REQUIRE(executed2.size() == 1);
    CHECK(executed2[0].status == 1);  // duplicate skipped
    CHECK(fx.chain.kv().at(k) == to_bytes("second"));
}

TEST_CASE("pending_blocks: replay guarantee and removal on commit") {
    Fixture fx;
    Block a = fx.add_block(2, 1, Block::genesis_digest(2));
    Block b = fx.add_block(2, 2, a.digest);
    CHECK(fx.chain.pending_blocks(2) == std::vector<Digest>{a.digest, b.digest});

    // Commit only `a`: `b` stays pending no matter how many superblocks pass.
    SuperBlock sb1 = SuperBlock::make(SuperBlock::genesis().digest, 1, 1,
                                      {BlockRef{2, a.digest}});
    fx.chain.append_and_execute(sb1, std::nullopt, fx.store);
    SuperBlock sb2 = SuperBlock::make(sb1.digest, 2, 2, {});
    fx.chain.append_and_execute(sb2, std::nullopt, fx.store);
    CHECK(fx.chain.pending_blocks(2) == std::vector<Digest>{b.digest});
    CHECK(fx.chain.committed_block(a.digest));

    // A crashed cluster's blocks never block other clusters' validation.
    Block c0 = fx.add_block(0, 1, Block::genesis_digest(0));
    fx.make_durable(c0.digest);
    SuperBlock sb3 = SuperBlock::make(sb2.digest, 3, 3, {BlockRef{0, c0.digest}});
    CHECK(fx.chain.validate_superblock(sb3, fx.store).ok);
}

TEST_CASE("record_durability counting") {
    Fixture fx;
    Digest d = hash("some block");
    fx.chain.credit_origin(d, 0);
    CHECK(fx.chain.durable_clusters(d) == 1);
    CHECK_FALSE(fx.chain.is_durable(d));  // origin only

    // f+1 ackers from one cluster count that cluster exactly once.
    fx.chain.record_durability(d, 1, 0);
    CHECK(fx.chain.durable_clusters(d) == 1);
    fx.chain.record_durability(d, 1, 1);
    CHECK(fx.chain.durable_clusters(d) == 2);
    fx.chain.record_durability(d, 1, 2);
    CHECK(fx.chain.durable_clusters(d) == 2);
    CHECK(fx.chain.is_durable(d));
}

TEST_CASE("execution determinism: replay from exports") {
    Fixture fx;
    Block a = fx.add_block(0, 1, Block::genesis_digest(0), 3);
    Block b = fx.add_block(1, 1, Block::genesis_digest(1), 2);
    SuperBlock sb = SuperBlock::make(SuperBlock::genesis().digest, 1, 1,
                                     {BlockRef{0, a.digest}, BlockRef{1, b.digest}});
    fx.chain.append_and_execute(sb, std::nullopt, fx.store);

    ChainStore replay(fx.topo, 6);
    replay.append_and_execute(sb, std::nullopt, fx.store);
    CHECK(replay.kv_digest() == fx.chain.kv_digest());
    CHECK(replay.export_chain() == fx.chain.export_chain());
}

TEST_CASE("randomized validation oracle agreement") {
    Rng rng(2024);
    int accepted = 0, rejected = 0;
    for (int i = 0; i < 300; ++i) {
        auto world = hbft::test::OracleWorld::generate(rng);
        for (int c = 0; c < 4; ++c) {
            SuperBlock sb = world.candidate(rng);
            bool expect = world.oracle_accepts(sb);
            bool got = world.chain.validate_superblock(sb, world.store).ok;
            if (expect != got) {
                CAPTURE(i);
                CAPTURE(c);
                CAPTURE(world.chain.validate_superblock(sb, world.store).reason);
            }
            REQUIRE(expect == got);
            (expect ? accepted : rejected)++;
        }
    }
    // The generator must exercise both verdicts substantially.
    CHECK(accepted > 100);
    CHECK(rejected > 100);
}

TEST_CASE("select_blocks caps at k_max preserving per-cluster prefixes") {
    Fixture fx;
    // 10 pending blocks across clusters; k_max 6 takes exactly 6, and each
    // cluster's contribution stays a prefix in local order.
    std::map<ClusterId, std::vector<Digest>> order;
    for (ClusterId c = 0; c < 3; ++c) {
        Digest parent = Block::genesis_digest(c);
        int count = c == 0 ? 4 : 3;
        for (int v = 1; v <= count; ++v) {
            Block b = fx.add_block(c, v, parent);
            fx.make_durable(b.digest);
            parent = b.digest;
            order[c].push_back(b.digest);
        }
    }
    auto picked = fx.chain.select_blocks(fx.store, {});
    REQUIRE(picked.size() == 6);
    std::map<ClusterId, std::vector<Digest>> got;
    for (const auto& id : picked) got[id.cluster].push_back(id.digest);
    for (const auto& [c, ids] : got) {
        REQUIRE(ids.size() <= order[c].size());
        for (size_t i = 0; i < ids.size(); ++i) CHECK(ids[i] == order[c][i]);
    }
    // Balanced: no cluster contributes more than ceil(6/3) here.
    for (const auto& [c, ids] : got) CHECK(ids.size() == 2);
}
