#include "hbft/roles.hpp"

namespace hbft::roles {

uint64_t rotation_period(const Topology& t) {
    uint64_t p = 1;
    for (auto n : t.sizes()) p *= n;
    return p;
}

ReplicaId representative(const Topology& t, ClusterId i, ViewId V) {
    uint64_t radix = 1;
    for (ClusterId j = 0; j < i; ++j) radix *= t.size(j);
    uint32_t index = static_cast<uint32_t>((V / radix) % t.size(i));
    return ReplicaId{i, index};
}

ClusterId global_leader_cluster(const Topology& t, ViewId V) {
    return static_cast<ClusterId>(V % t.clusters());
}

ReplicaId local_leader(const Topology& t, ClusterId i, ViewId v, ViewId V) {
    uint32_t n = t.size(i);
    uint32_t L = static_cast<uint32_t>(v % n);
    if (n >= 2 && L == representative(t, i, V).index)
        L = static_cast<uint32_t>((v + 1) % n);
    return ReplicaId{i, L};
}

ReplicaId disseminator(const Topology& t, ClusterId i, ViewId v, ViewId V) {
    uint32_t n = t.size(i);
    uint32_t leader = local_leader(t, i, v, V).index;
    uint32_t rep = representative(t, i, V).index;
    for (uint32_t step = 0; step < n; ++step) {
        uint32_t cand = static_cast<uint32_t>((v + 2 + step) % n);
        if (cand != leader && cand != rep) return ReplicaId{i, cand};
    }
    // n <= 2: no replica is free of other roles; fall back deterministically.
    return ReplicaId{i, static_cast<uint32_t>((v + 2) % n)};
}

}  // namespace hbft::roles
