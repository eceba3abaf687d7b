#pragma once

#include <map>
#include <optional>
#include <vector>

#include "hbft/crypto.hpp"
#include "hbft/roles.hpp"
#include "hbft/topology.hpp"
#include "hbft/types.hpp"

namespace hbft {

/// Per-replica store of verified, disseminated blocks. Append-only; only
/// entries that passed verify_locked (or were locked locally) get in.
class BlockStore {
public:
    struct Entry {
        Block block;
        LockCertificate cert;
        uint64_t stored_at = 0;
    };

    bool contains(const Digest& d) const { return entries_.count(d) > 0; }

    const Entry* find(const Digest& d) const {
        auto it = entries_.find(d);
        return it == entries_.end() ? nullptr : &it->second;
    }

    /// Returns true when the block was new.
    bool put(const Block& b, const LockCertificate& cert, uint64_t now) {
        return entries_.emplace(b.digest, Entry{b, cert, now}).second;
    }

    size_t size() const { return entries_.size(); }
    const std::map<Digest, Entry>& entries() const { return entries_; }

private:
    std::map<Digest, Entry> entries_;
};

/// True iff `cert` is a valid 2f_i+1 cluster signature of block.digest by
/// the origin cluster's replicas.
bool verify_locked(const Block& block, const LockCertificate& cert,
                   const KeyRegistry& registry);

/// The f_j+1 rotating recipients in cluster j for a block locked at local
/// view v: indices (v + t) mod n_j for t = 0..f_j.
std::vector<ReplicaId> dissemination_targets(const Topology& t, ClusterId j, ViewId v);

/// Rotating f_j+1 recipients for global-layer sends into cluster j at global
/// view V; the cluster's representative always comes first.
std::vector<ReplicaId> global_targets(const Topology& t, ClusterId j, ViewId V);

}  // namespace hbft
