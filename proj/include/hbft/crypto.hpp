#pragma once

#include <array>
#include <vector>

#include "hbft/result.hpp"
#include "hbft/topology.hpp"
#include "hbft/types.hpp"

namespace hbft {

enum class SigScheme : uint8_t {
    Simulated,  // tag derived from (signer, payload) alone; fast test mode
    Keyed,      // HMAC-SHA256 under a per-replica secret
};

/// Holds every replica's signing material and verifies partial and cluster
/// signatures against it. Quorum rule: a ClusterSignature verifies iff all
/// partials verify over the payload, signers are distinct replicas of the
/// claimed cluster, and there are at least 2f_i+1 of them.
///
/// The two schemes are byte-compatible at the protocol layer: both produce a
/// 32-byte tag over the payload digest.
class KeyRegistry {
public:
    KeyRegistry() = default;
    KeyRegistry(Topology topo, SigScheme scheme, const Digest& master_seed);

    const Topology& topology() const { return topo_; }
    SigScheme scheme() const { return scheme_; }

    /// Secret for one replica (loadable registry entries go through this).
    void set_secret(ReplicaId r, const std::array<uint8_t, 32>& key);
    const std::array<uint8_t, 32>& secret(ReplicaId r) const;

    PartialSignature sign(ReplicaId signer, const Digest& payload) const;
    bool verify_partial(const PartialSignature& p, const Digest& payload) const;

    /// Assemble a cluster signature from partials. All partials must verify,
    /// carry the same payload, come from distinct replicas of `cluster`, and
    /// number at least `quorum`.
    Result<ClusterSignature> combine(const std::vector<PartialSignature>& partials,
                                     ClusterId cluster, uint32_t quorum) const;

    /// True iff the ClusterSignature invariants hold for this payload,
    /// with the quorum taken from the topology (2f_i+1).
    bool verify_cluster(const ClusterSignature& sig, const Digest& payload) const;

private:
    Digest tag_for(ReplicaId signer, const Digest& payload) const;

    Topology topo_;
    SigScheme scheme_ = SigScheme::Simulated;
    std::vector<std::vector<std::array<uint8_t, 32>>> secrets_;
};

/// HMAC-SHA256 (RFC 2104 construction over the EVP SHA-256 primitive).
Digest hmac_sha256(const std::array<uint8_t, 32>& key, const uint8_t* data, size_t len);

}  // namespace hbft
