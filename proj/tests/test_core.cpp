#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "hbft/crypto.hpp"
#include "hbft/mempool.hpp"
#include "hbft/rng.hpp"
#include "hbft/topology.hpp"

using namespace hbft;

namespace {

KeyRegistry test_registry(SigScheme scheme = SigScheme::Simulated) {
    return KeyRegistry(Topology::uniform(3, 4), scheme, hash("test-keys"));
}

std::vector<PartialSignature> sign_subset(const KeyRegistry& reg, ClusterId c,
                                          const std::vector<uint32_t>& idx,
                                          const Digest& payload) {
    std::vector<PartialSignature> out;
    for (auto i : idx) out.push_back(reg.sign(ReplicaId{c, i}, payload));
    return out;
}

}  // namespace

TEST_CASE("hash: deterministic, standard empty vector, distinct inputs") {
    CHECK(hash("abc") == hash("abc"));
    // SHA-256 of the empty string.
    CHECK(hash("").hex() ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(hash("a") != hash("b"));
    CHECK(hash("a").bytes.size() == 32);
}

TEST_CASE("canonical struct digests recompute and separate by field") {
    Transaction t1 = Transaction::make(7, 1, to_bytes("x"));
    Transaction t2 = Transaction::make(7, 2, to_bytes("x"));
    CHECK(t1.txid != t2.txid);
    CHECK(Transaction::compute_txid(7, 1, to_bytes("x")) == t1.txid);

    Block b = Block::make(1, 3, Block::genesis_digest(1), {t1, t2});
    CHECK(Block::compute_digest(b) == b.digest);
    Block b2 = Block::make(1, 4, Block::genesis_digest(1), {t1, t2});
    CHECK(b.digest != b2.digest);

    SuperBlock sb = SuperBlock::make(SuperBlock::genesis().digest, 1, 1,
                                     {BlockRef{1, b.digest}});
    CHECK(SuperBlock::compute_digest(sb) == sb.digest);
    CHECK(sb.digest != SuperBlock::genesis().digest);
}

TEST_CASE("confirmation codec round-trips") {
    auto reg = test_registry();
    Digest payload = confirmation_payload(std::nullopt, 4, hash("sb"), 2,
                                          GlobalPhase::NewView);
    auto sig = reg.combine(sign_subset(reg, 1, {0, 1, 2}, payload), 1, 3);
    REQUIRE(sig.ok());
    ClusterConfirmation conf{std::nullopt, 4, hash("sb"), 2, GlobalPhase::NewView, 1,
                             sig.take()};
    Bytes raw = conf.encoded();
    Decoder d(raw);
    ClusterConfirmation back = decode_confirmation(d);
    CHECK(back == conf);
    CHECK(d.remaining() == 0);
}

TEST_CASE("partial signatures: round trip, binding, distinct signers") {
    for (auto scheme : {SigScheme::Simulated, SigScheme::Keyed}) {
        auto reg = test_registry(scheme);
        Digest p = hash("payload");
        Digest q = hash("other");
        auto sig = reg.sign(ReplicaId{0, 1}, p);
        CHECK(reg.verify_partial(sig, p));
        CHECK_FALSE(reg.verify_partial(sig, q));

        // Two distinct signers over the same payload: both verify, tags differ.
        auto s2 = reg.sign(ReplicaId{0, 2}, p);
        CHECK(reg.verify_partial(s2, p));
        CHECK(sig.tag != s2.tag);
    }
}

TEST_CASE("combine_cluster: quorum arithmetic at n=4, f=1") {
    auto reg = test_registry();
    Digest p = hash("block payload");

    auto ok = reg.combine(sign_subset(reg, 0, {0, 1, 2}, p), 0, 3);
    REQUIRE(ok.ok());
    CHECK(reg.verify_cluster(ok.value(), p));

    CHECK(reg.combine(sign_subset(reg, 0, {0, 1}, p), 0, 3).error() ==
          Err::InsufficientQuorum);

    // Duplicated signer counts once.
    CHECK(reg.combine(sign_subset(reg, 0, {0, 1, 1}, p), 0, 3).error() ==
          Err::InsufficientQuorum);

    // Mixed payloads refuse to combine.
    auto mixed = sign_subset(reg, 0, {0, 1}, p);
    mixed.push_back(reg.sign(ReplicaId{0, 2}, hash("different")));
    CHECK(reg.combine(mixed, 0, 3).error() == Err::MixedPayload);

    // Foreign signer: partial from another cluster.
    auto foreign = sign_subset(reg, 0, {0, 1}, p);
    foreign.push_back(reg.sign(ReplicaId{1, 2}, p));
    CHECK(reg.combine(foreign, 0, 3).error() == Err::ForeignSigner);

    // Extra signatures beyond the quorum are fine.
    auto four = reg.combine(sign_subset(reg, 0, {0, 1, 2, 3}, p), 0, 3);
    REQUIRE(four.ok());
    CHECK(reg.verify_cluster(four.value(), p));
}

TEST_CASE("verify_cluster: binding and cross-cluster rejection") {
    auto reg = test_registry();
    Digest p = hash("p");
    auto sig = reg.combine(sign_subset(reg, 2, {1, 2, 3}, p), 2, 3).take();
    CHECK(reg.verify_cluster(sig, p));
    CHECK_FALSE(reg.verify_cluster(sig, hash("p'")));

    // Signer set spanning two clusters never verifies.
    ClusterSignature mixed = sig;
    mixed.parts[0] = reg.sign(ReplicaId{1, 0}, p);
    CHECK_FALSE(reg.verify_cluster(mixed, p));

    // Claiming the wrong cluster also fails.
    ClusterSignature relabeled = sig;
    relabeled.cluster = 1;
    CHECK_FALSE(reg.verify_cluster(relabeled, p));
}

TEST_CASE("exhaustive subsets at n=4: quorum iff >= 2f+1 distinct signers") {
    auto reg = test_registry();
    Digest p = hash("exhaustive");
    for (uint32_t mask = 0; mask < 16; ++mask) {
        std::vector<uint32_t> idx;
        for (uint32_t i = 0; i < 4; ++i)
            if (mask & (1u << i)) idx.push_back(i);
        auto combined = reg.combine(sign_subset(reg, 0, idx, p), 0, 3);
        if (idx.size() >= 3) {
            REQUIRE(combined.ok());
            CHECK(reg.verify_cluster(combined.value(), p));
        } else {
            CHECK(combined.error() == Err::InsufficientQuorum);
            // However assembled, a signature carrying only this subset's
            // partials must not verify.
            ClusterSignature forged{0, sign_subset(reg, 0, idx, p)};
            CHECK_FALSE(reg.verify_cluster(forged, p));
            // Padding with duplicates does not help.
            ClusterSignature padded{0, {}};
            for (int rep = 0; rep < 3; ++rep)
                for (auto i : idx) padded.parts.push_back(reg.sign(ReplicaId{0, i}, p));
            CHECK_FALSE(reg.verify_cluster(padded, p));
        }
    }
}

TEST_CASE("forged tags do not verify") {
    auto reg = test_registry();
    Digest p = hash("target");
    auto sig = reg.sign(ReplicaId{0, 0}, p);
    sig.tag.bytes[0] ^= 1;
    CHECK_FALSE(reg.verify_partial(sig, p));

    // A keyed-mode partial from a registry with different secrets fails here.
    KeyRegistry other(Topology::uniform(3, 4), SigScheme::Keyed, hash("other-keys"));
    KeyRegistry mine(Topology::uniform(3, 4), SigScheme::Keyed, hash("my-keys"));
    auto stranger = other.sign(ReplicaId{0, 0}, p);
    CHECK_FALSE(mine.verify_partial(stranger, p));
    CHECK(other.verify_partial(stranger, p));
}

TEST_CASE("topology shape rules") {
    CHECK_THROWS(Topology::uniform(2, 4));  // N must be 2F+1
    CHECK_THROWS(Topology::uniform(3, 5));  // n must be 3f+1
    Topology t({4, 7, 10});
    CHECK(t.F() == 1);
    CHECK(t.f(0) == 1);
    CHECK(t.f(1) == 2);
    CHECK(t.f(2) == 3);
    CHECK(t.local_quorum(2) == 7);
    CHECK(t.confirm_quorum(1) == 5);
    CHECK(t.global_quorum() == 2);
}

TEST_CASE("mempool: duplicate submissions pool once and never re-admit") {
    Mempool pool;
    Transaction tx = Transaction::make(1, 1, to_bytes("x"));
    CHECK(pool.add(tx));
    CHECK_FALSE(pool.add(tx));  // flooded duplicate
    CHECK(pool.size() == 1);
    pool.consume({tx});
    CHECK(pool.empty());
    CHECK_FALSE(pool.add(tx));  // consumed transactions stay consumed
}

TEST_CASE("canonical encoding: randomized confirmation round-trip and injectivity") {
    auto reg = test_registry();
    Rng rng(7);
    std::set<Bytes> encodings;
    std::set<std::pair<Digest, ClusterId>> statements;  // payload excludes clid
    for (int i = 0; i < 200; ++i) {
        ClusterConfirmation c;
        if (rng.uniform(0, 1)) c.h = hash("h" + std::to_string(rng.uniform(0, 5)));
        c.v = rng.uniform(0, 4);
        if (rng.uniform(0, 1)) c.h_prime = hash("p" + std::to_string(rng.uniform(0, 5)));
        c.v_prime = rng.uniform(0, 4);
        c.ph = static_cast<GlobalPhase>(rng.uniform(0, 2));
        c.clid = static_cast<ClusterId>(rng.uniform(0, 2));
        Digest payload = c.signed_payload();
        std::vector<PartialSignature> parts;
        for (uint32_t k = 0; k < 3; ++k)
            parts.push_back(reg.sign(ReplicaId{c.clid, k}, payload));
        c.sig = reg.combine(parts, c.clid, 3).take();

        Bytes raw = c.encoded();
        Decoder d(raw);
        ClusterConfirmation back = decode_confirmation(d);
        REQUIRE(back == c);
        REQUIRE(d.remaining() == 0);
        encodings.insert(raw);
        statements.insert({payload, c.clid});
    }
    // Distinct field values never collide at this scale.
    CHECK(encodings.size() == statements.size());
}
