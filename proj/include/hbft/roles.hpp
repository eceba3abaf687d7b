#pragma once

#include "hbft/topology.hpp"
#include "hbft/types.hpp"

namespace hbft {

/// Role assignment. Pure functions of (topology, views); no state.
///
/// Representatives follow a mixed-radix schedule over the global view so
/// that every combination of per-cluster representatives occurs exactly once
/// per rotation period (the product of all cluster sizes).
namespace roles {

/// Product of all cluster sizes; the representative schedule's full period.
uint64_t rotation_period(const Topology& t);

/// Representative of cluster i at global view V.
ReplicaId representative(const Topology& t, ClusterId i, ViewId V);

/// Cluster whose representative leads global view V.
ClusterId global_leader_cluster(const Topology& t, ViewId V);

inline ReplicaId global_leader(const Topology& t, ViewId V) {
    return representative(t, global_leader_cluster(t, V), V);
}

/// Local leader of cluster i at local view v, skipping over the replica that
/// currently serves as representative (global view V).
ReplicaId local_leader(const Topology& t, ClusterId i, ViewId v, ViewId V);

/// Rotating disseminator: first index in (v+2, v+3, ...) mod n_i distinct
/// from both the local leader and the representative. Distinct whenever
/// n_i >= 3; with fewer replicas it may coincide with another role.
ReplicaId disseminator(const Topology& t, ClusterId i, ViewId v, ViewId V);

}  // namespace roles
}  // namespace hbft
