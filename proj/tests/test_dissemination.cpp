#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hbft/dissemination.hpp"
#include "hbft/replica.hpp"
#include "recording_context.hpp"

using namespace hbft;
using hbft::test::RecordingContext;

namespace {

struct Fixture {
    Topology topo = Topology::uniform(3, 4);
    KeyRegistry registry{topo, SigScheme::Simulated, hash("dissem-test")};
    Params params;

    LockCertificate lock(const Block& b) {
        Digest payload = local_vote_payload(b.origin, LocalPhase::Commit, b.local_view,
                                            b.digest);
        std::vector<PartialSignature> parts;
        for (uint32_t i = 0; i < 3; ++i)
            parts.push_back(registry.sign(ReplicaId{b.origin, i}, payload));
        return LockCertificate{b.digest, b.origin, b.local_view,
                               registry.combine(parts, b.origin, 3).take()};
    }

    Block block(ClusterId origin, ViewId view, int txs = 1) {
        std::vector<Transaction> list;
        for (int i = 0; i < txs; ++i)
            list.push_back(Transaction::make(100 + origin, view * 100 + i, to_bytes("x")));
        return Block::make(origin, view, Block::genesis_digest(origin), std::move(list));
    }
};

}  // namespace

TEST_CASE("target rule: f+1 rotating recipients per cluster") {
    Topology t = Topology::uniform(3, 4);
    // f=1: two targets per cluster, rotating with the lock view.
    auto tg = dissemination_targets(t, 1, 0);
    REQUIRE(tg.size() == 2);
    CHECK(tg[0] == ReplicaId{1, 0});
    CHECK(tg[1] == ReplicaId{1, 1});
    auto tg5 = dissemination_targets(t, 1, 5);
    CHECK(tg5[0] == ReplicaId{1, 1});
    CHECK(tg5[1] == ReplicaId{1, 2});

    // Remote message count at N=3, n=4: two remote clusters, two copies each.
    size_t remote = 0;
    for (ClusterId c = 0; c < 3; ++c)
        if (c != 0) remote += dissemination_targets(t, c, 3).size();
    CHECK(remote == 4);

    // Degenerate single-cluster system: no remote clusters to reach.
    Topology solo = Topology::uniform(1, 4);
    size_t solo_remote = 0;
    for (ClusterId c = 0; c < solo.clusters(); ++c)
        if (c != 0) solo_remote += dissemination_targets(solo, c, 0).size();
    CHECK(solo_remote == 0);
}

TEST_CASE("verify_locked: round trip, binding, wrong-cluster signers") {
    Fixture fx;
    Block b = fx.block(0, 1);
    LockCertificate cert = fx.lock(b);
    CHECK(verify_locked(b, cert, fx.registry));

    // Certificate for a different digest does not transfer.
    Block other = fx.block(0, 2);
    CHECK_FALSE(verify_locked(other, cert, fx.registry));

    // Signed by the wrong cluster's replicas.
    Block foreign = fx.block(1, 1);
    LockCertificate wrong = fx.lock(fx.block(0, 1));
    wrong.block = foreign.digest;
    wrong.cluster = 1;
    CHECK_FALSE(verify_locked(foreign, wrong, fx.registry));
}

TEST_CASE("first direct receipt stores, relays to n-1 peers, and acks") {
    Fixture fx;
    // Replica 1.0 is in the round-0 target set of cluster 1.
    Replica r(&fx.topo, &fx.registry, &fx.params, ReplicaId{1, 0});
    RecordingContext ctx;
    r.start(ctx);
    ctx.clear();

    Block b = fx.block(0, 1);
    Message m;
    m.from = Address::of(ReplicaId{0, 2});
    m.to = Address::of(ReplicaId{1, 0});
    m.layer = Layer::Dissem;
    m.body = BlockMsg{b, fx.lock(b), false, 0};
    r.on_message(m, ctx);

    CHECK(r.blocks().contains(b.digest));
    CHECK(ctx.count_traced(TraceEv::Store) == 1);
    // Relays to the 3 local peers plus storage acks to every other replica.
    size_t relays = 0, acks = 0;
    for (const auto& s : ctx.sent) {
        if (const auto* bm = std::get_if<BlockMsg>(&s.body)) {
            CHECK(bm->relayed);
            CHECK(s.to.replica.cluster == 1);
            relays++;
        } else if (std::holds_alternative<StoreAck>(s.body)) {
            acks++;
        }
    }
    CHECK(relays == 3);
    CHECK(acks == 11);

    // Duplicate receipt: zero messages.
    ctx.clear();
    r.on_message(m, ctx);
    CHECK(ctx.sent.empty());
}

TEST_CASE("forged certificate: dropped, nothing stored") {
    Fixture fx;
    Replica r(&fx.topo, &fx.registry, &fx.params, ReplicaId{1, 0});
    RecordingContext ctx;
    r.start(ctx);
    ctx.clear();

    Block b = fx.block(0, 1);
    LockCertificate cert = fx.lock(b);
    cert.sig.parts[0].tag.bytes[5] ^= 0xff;
    Message m;
    m.from = Address::of(ReplicaId{0, 2});
    m.to = Address::of(ReplicaId{1, 0});
    m.layer = Layer::Dissem;
    m.body = BlockMsg{b, cert, false, 0};
    r.on_message(m, ctx);

    CHECK_FALSE(r.blocks().contains(b.digest));
    CHECK(ctx.count_traced(TraceEv::Drop) == 1);
    CHECK(ctx.sent.empty());
}

TEST_CASE("relayed receipt stores without re-relay; non-targets do not ack") {
    Fixture fx;
    // Replica 1.3 is outside the round-0 target set {1.0, 1.1}.
    Replica r(&fx.topo, &fx.registry, &fx.params, ReplicaId{1, 3});
    RecordingContext ctx;
    r.start(ctx);
    ctx.clear();

    Block b = fx.block(0, 1);
    Message m;
    m.from = Address::of(ReplicaId{1, 0});
    m.to = Address::of(ReplicaId{1, 3});
    m.layer = Layer::Dissem;
    m.body = BlockMsg{b, fx.lock(b), true, 0};
    r.on_message(m, ctx);

    CHECK(r.blocks().contains(b.digest));
    CHECK(ctx.count_sent<BlockMsg>() == 0);
    CHECK(ctx.count_sent<StoreAck>() == 0);
}

TEST_CASE("store acks accumulate durability per cluster, deduplicated") {
    Fixture fx;
    Replica r(&fx.topo, &fx.registry, &fx.params, ReplicaId{0, 0});
    RecordingContext ctx;
    r.start(ctx);

    Block b = fx.block(0, 1);
    Message direct;
    direct.from = Address::of(ReplicaId{0, 3});
    direct.to = Address::of(ReplicaId{0, 0});
    direct.layer = Layer::Dissem;
    direct.body = BlockMsg{b, fx.lock(b), true, 0};
    r.on_message(direct, ctx);
    // Lock certificate credits the origin cluster outright.
    CHECK(r.chain().durable_clusters(b.digest) == 1);

    auto ack_from = [&](ClusterId c, uint32_t k) {
        Message m;
        m.from = Address::of(ReplicaId{c, k});
        m.to = Address::of(ReplicaId{0, 0});
        m.layer = Layer::Dissem;
        m.body = StoreAck{b.digest, 0};
        r.on_message(m, ctx);
    };
    ack_from(1, 0);
    CHECK(r.chain().durable_clusters(b.digest) == 1);  // one acker < f+1
    ack_from(1, 0);
    CHECK(r.chain().durable_clusters(b.digest) == 1);  // same acker counts once
    ack_from(1, 1);
    CHECK(r.chain().durable_clusters(b.digest) == 2);  // f+1 reached
    CHECK(r.chain().is_durable(b.digest));
}

TEST_CASE("certificate below the signer threshold never verifies as locked") {
    Fixture fx;
    Block b = fx.block(0, 1);
    Digest payload = local_vote_payload(0, LocalPhase::Commit, 1, b.digest);
    std::vector<PartialSignature> two;
    for (uint32_t i = 0; i < 2; ++i)
        two.push_back(fx.registry.sign(ReplicaId{0, i}, payload));
    // combine refuses outright at quorum 3...
    CHECK(fx.registry.combine(two, 0, 3).error() == Err::InsufficientQuorum);
    // ...and a hand-assembled two-signer certificate fails verification.
    LockCertificate thin{b.digest, 0, 1, ClusterSignature{0, two}};
    CHECK_FALSE(verify_locked(b, thin, fx.registry));
}
