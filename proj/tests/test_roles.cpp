#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <tuple>

#include "hbft/roles.hpp"

using namespace hbft;

TEST_CASE("representative schedule: mixed radix") {
    Topology t = Topology::uniform(3, 4);
    CHECK(roles::representative(t, 0, 0) == ReplicaId{0, 0});
    CHECK(roles::representative(t, 1, 0) == ReplicaId{1, 0});
    CHECK(roles::representative(t, 2, 0) == ReplicaId{2, 0});
    // 5 = 1 + 1*4 + 0*16
    CHECK(roles::representative(t, 0, 5).index == 1);
    CHECK(roles::representative(t, 1, 5).index == 1);
    CHECK(roles::representative(t, 2, 5).index == 0);
}

TEST_CASE("representative schedule visits every combination exactly once") {
    Topology t = Topology::uniform(3, 4);
    CHECK(roles::rotation_period(t) == 64);
    std::set<std::tuple<uint32_t, uint32_t, uint32_t>> seen;
    for (ViewId v = 0; v < 64; ++v) {
        seen.insert({roles::representative(t, 0, v).index,
                     roles::representative(t, 1, v).index,
                     roles::representative(t, 2, v).index});
    }
    CHECK(seen.size() == 64);
}

TEST_CASE("global leader round robin") {
    Topology t = Topology::uniform(3, 4);
    CHECK(roles::global_leader_cluster(t, 0) == 0);
    CHECK(roles::global_leader_cluster(t, 4) == 1);
    CHECK(roles::global_leader(t, 4) == roles::representative(t, 1, 4));
}

TEST_CASE("local leader with representative skip") {
    Topology t = Topology::uniform(3, 4);
    // v=2, rep index 0 at V=0: no collision.
    CHECK(roles::local_leader(t, 0, 2, 0) == ReplicaId{0, 2});
    // v=0, rep index 0: skip to 1.
    CHECK(roles::local_leader(t, 0, 0, 0) == ReplicaId{0, 1});
    // n=1 degenerate: leader 0 coincides with the representative.
    Topology solo = Topology::uniform(1, 1);
    CHECK(roles::local_leader(solo, 0, 5, 3) == ReplicaId{0, 0});
    CHECK(roles::representative(solo, 0, 3) == ReplicaId{0, 0});
}

TEST_CASE("leader and representative are distinct whenever n >= 2") {
    Topology t = Topology::uniform(3, 4);
    for (ViewId V = 0; V < 64; ++V)
        for (ViewId v = 0; v < 8; ++v)
            for (ClusterId c = 0; c < 3; ++c)
                CHECK(roles::local_leader(t, c, v, V) != roles::representative(t, c, V));
}

TEST_CASE("disseminator: first free index from v+2") {
    Topology t = Topology::uniform(3, 4);
    // v=0, V=0: rep 0, leader 1 -> disseminator 2.
    CHECK(roles::disseminator(t, 0, 0, 0) == ReplicaId{0, 2});
    // Distinct from both roles whenever n >= 3.
    for (ViewId v = 0; v < 8; ++v)
        for (ViewId V = 0; V < 8; ++V) {
            auto d = roles::disseminator(t, 0, v, V);
            CHECK(d != roles::local_leader(t, 0, v, V));
            CHECK(d != roles::representative(t, 0, V));
        }
    // With global views advancing alongside local ones, every replica serves
    // as disseminator within one pass.
    std::set<uint32_t> served;
    for (ViewId v = 0; v < 4; ++v) served.insert(roles::disseminator(t, 0, v, v).index);
    CHECK(served.size() == 4);
}

TEST_CASE("rotation safety: a fully healthy representative set recurs") {
    // For any marking of <= F crashed clusters and one Byzantine replica in
    // each live cluster, some view in every window of rotation_period views
    // gives every live cluster a healthy representative.
    Topology t = Topology::uniform(3, 4);
    uint64_t period = roles::rotation_period(t);
    for (int crashed = -1; crashed < 3; ++crashed) {
        for (uint32_t b0 = 0; b0 < 4; ++b0)
            for (uint32_t b1 = 0; b1 < 4; ++b1)
                for (uint32_t b2 = 0; b2 < 4; ++b2) {
                    uint32_t byz[3] = {b0, b1, b2};
                    for (ViewId start = 0; start < period; start += 13) {
                        bool found = false;
                        for (ViewId v = start; v < start + period && !found; ++v) {
                            bool all_healthy = true;
                            for (ClusterId c = 0; c < 3; ++c) {
                                if (static_cast<int>(c) == crashed) continue;
                                if (roles::representative(t, c, v).index == byz[c])
                                    all_healthy = false;
                            }
                            found = all_healthy;
                        }
                        REQUIRE(found);
                    }
                }
    }
}
