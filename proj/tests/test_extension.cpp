#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "extension_oracle.hpp"
#include "hbft/rng.hpp"

using namespace hbft;
using namespace hbft::test;

namespace {

struct Fixture {
    Topology topo = Topology::uniform(3, 4);
    KeyRegistry reg{topo, SigScheme::Simulated, hash("ext-test")};
    ViewId view = 7;
    ClusterId leader_cluster = static_cast<ClusterId>(7 % 3);  // view 7 -> cluster 1
    ClusterSigner signer = loopback_signer(reg, leader_cluster);
};

}  // namespace

TEST_CASE("ext_list picks the highest prepared view") {
    Fixture fx;
    std::vector<ClusterConfirmation> confs = {make_nv(fx.reg, 0, fx.view, 3),
                                              make_nv(fx.reg, 2, fx.view, 5)};
    auto ext = ext_list(confs, fx.view, 2, fx.leader_cluster, fx.reg, fx.signer);
    REQUIRE(ext.ok());
    CHECK(ext.value().v_prime == 5);
    CHECK(ext.value().h_prime == sb_digest_for(5));
    CHECK(ext.value().count == 2);
    CHECK(verify_extension(ext.value(), fx.leader_cluster, fx.reg));
}

TEST_CASE("ties break to the lowest cluster id and the result is input-order free") {
    Fixture fx;
    std::vector<ClusterConfirmation> confs = {make_nv(fx.reg, 2, fx.view, 4),
                                              make_nv(fx.reg, 0, fx.view, 4),
                                              make_nv(fx.reg, 1, fx.view, 1)};
    auto plan = plan_extension(confs, fx.view, 2, fx.reg);
    REQUIRE(plan.ok());
    CHECK(plan.value().seed.clid == 0);

    std::sort(confs.begin(), confs.end());
    do {
        auto ext = ext_list(confs, fx.view, 2, fx.leader_cluster, fx.reg, fx.signer);
        REQUIRE(ext.ok());
        CHECK(ext.value().v_prime == 4);
        CHECK(ext.value().count == 3);
    } while (std::next_permutation(confs.begin(), confs.end()));
}

TEST_CASE("genesis case: all clusters at view 0") {
    Fixture fx;
    Digest genesis = SuperBlock::genesis().digest;
    std::vector<ClusterConfirmation> confs;
    for (ClusterId c = 0; c < 3; ++c) {
        ClusterConfirmation conf;
        conf.v = fx.view;
        conf.h_prime = genesis;
        conf.v_prime = 0;
        conf.ph = GlobalPhase::NewView;
        conf.clid = c;
        std::vector<PartialSignature> parts;
        for (uint32_t k = 0; k < 3; ++k)
            parts.push_back(fx.reg.sign(ReplicaId{c, k}, conf.signed_payload()));
        conf.sig = fx.reg.combine(parts, c, 3).take();
        confs.push_back(conf);
    }
    auto ext = ext_list(confs, fx.view, 2, fx.leader_cluster, fx.reg, fx.signer);
    REQUIRE(ext.ok());
    CHECK(ext.value().v_prime == 0);
    CHECK(ext.value().h_prime == genesis);
}

TEST_CASE("cluster_start: constructor and guards") {
    Fixture fx;
    auto phi = make_nv(fx.reg, 2, fx.view, 3);
    auto draft = cluster_start(phi, fx.view, fx.reg, fx.signer);
    REQUIRE(draft.ok());
    CHECK(draft.value().contributors == std::vector<ClusterId>{2});
    CHECK(verify_extension_draft(draft.value(), fx.leader_cluster, fx.reg));

    // Wrong phase refuses.
    auto bad_phase = phi;
    bad_phase.ph = GlobalPhase::Prepare;
    CHECK(cluster_start(bad_phase, fx.view, fx.reg, fx.signer).error() ==
          Err::BadConfirmation);

    // Broken signature refuses.
    auto broken = make_nv(fx.reg, 2, fx.view, 3, /*valid=*/false);
    CHECK(cluster_start(broken, fx.view, fx.reg, fx.signer).error() ==
          Err::BadConfirmation);
}

TEST_CASE("cluster_iterate: dominated append, dedup, non-qualifying unchanged") {
    Fixture fx;
    auto phi0 = make_nv(fx.reg, 0, fx.view, 5);
    auto draft = cluster_start(phi0, fx.view, fx.reg, fx.signer).take();

    // Dominated confirmation from a new cluster appends.
    auto lower = make_nv(fx.reg, 1, fx.view, 3);
    auto grown = cluster_iterate(draft, lower, fx.leader_cluster, fx.reg, fx.signer);
    REQUIRE(grown.ok());
    CHECK(grown.value().contributors == std::vector<ClusterId>{0, 1});

    // Already-contributing cluster leaves the draft unchanged.
    auto dup = make_nv(fx.reg, 0, fx.view, 2);
    auto same = cluster_iterate(grown.value(), dup, fx.leader_cluster, fx.reg, fx.signer);
    REQUIRE(same.ok());
    CHECK(same.value().contributors == grown.value().contributors);

    // A higher prepared view cannot be folded under this seed.
    auto higher = make_nv(fx.reg, 2, fx.view, 9);
    auto still = cluster_iterate(grown.value(), higher, fx.leader_cluster, fx.reg,
                                 fx.signer);
    REQUIRE(still.ok());
    CHECK(still.value().contributors == grown.value().contributors);
}

TEST_CASE("cluster_finalize: threshold and signature") {
    Fixture fx;
    auto phi0 = make_nv(fx.reg, 0, fx.view, 5);
    auto draft = cluster_start(phi0, fx.view, fx.reg, fx.signer).take();
    CHECK(cluster_finalize(draft, 2, fx.leader_cluster, fx.reg, fx.signer).error() ==
          Err::InsufficientContributors);

    auto lower = make_nv(fx.reg, 1, fx.view, 3);
    draft = cluster_iterate(draft, lower, fx.leader_cluster, fx.reg, fx.signer).take();
    auto fin = cluster_finalize(draft, 2, fx.leader_cluster, fx.reg, fx.signer);
    REQUIRE(fin.ok());
    CHECK(fin.value().count == 2);
    CHECK(verify_extension(fin.value(), fx.leader_cluster, fx.reg));
    // The finalized signature binds the count: tampering breaks it.
    Extension tampered = fin.value();
    tampered.count = 3;
    CHECK_FALSE(verify_extension(tampered, fx.leader_cluster, fx.reg));
}

TEST_CASE("ext_list matches the brute-force oracle on random multisets") {
    Fixture fx;
    Rng rng(99);
    for (int trial = 0; trial < 400; ++trial) {
        std::vector<ClusterConfirmation> confs;
        size_t n = rng.uniform(0, 4);
        for (size_t i = 0; i < n; ++i) {
            ClusterId c = static_cast<ClusterId>(rng.uniform(0, 2));
            ViewId vp = rng.uniform(0, 2);
            bool valid = rng.uniform(0, 3) > 0;
            confs.push_back(make_nv(fx.reg, c, fx.view, vp, valid));
        }
        ExtExpect expect = brute_force_extension(confs, fx.view, 2, fx.reg);
        auto got = ext_list(confs, fx.view, 2, fx.leader_cluster, fx.reg, fx.signer);
        REQUIRE(got.ok() == expect.ok);
        if (expect.ok) {
            CHECK(got.value().v_prime == expect.v_prime);
            CHECK(got.value().h_prime == std::optional<Digest>(expect.h_prime));
            CHECK(got.value().count == expect.count);
            CHECK(verify_extension(got.value(), fx.leader_cluster, fx.reg));
        }
    }
}
