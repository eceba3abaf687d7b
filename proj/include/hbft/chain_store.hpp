#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hbft/dissemination.hpp"
#include "hbft/topology.hpp"
#include "hbft/types.hpp"

namespace hbft {

struct Validation {
    bool ok = true;
    std::string reason;

    static Validation pass() { return {true, {}}; }
    static Validation fail(std::string r) { return {false, std::move(r)}; }
    explicit operator bool() const { return ok; }
};

struct ExecutedTx {
    Digest txid;
    uint64_t client = 0;
    uint64_t height = 0;
    uint8_t status = 0;  // 0 applied, 1 duplicate-skipped
};

/// Transaction payloads are key-value writes in canonical form
/// (length-prefixed key then value). Anything else executes as a no-op.
std::optional<std::pair<Bytes, Bytes>> parse_kv_payload(const Bytes& payload);
Bytes make_kv_payload(const Bytes& key, const Bytes& value);

/// Per-replica committed superblock chain plus the bookkeeping around it:
/// pending (locked, disseminated, uncommitted) blocks, durability evidence,
/// and the deterministic key-value application state.
class ChainStore {
public:
    struct Entry {
        SuperBlock sb;
        std::optional<GlobalCertificate> cert;  // null for genesis / ancestors
    };

    explicit ChainStore(Topology topo, uint32_t k_max);

    const Topology& topology() const { return topo_; }
    uint32_t k_max() const { return k_max_; }

    const SuperBlock& head() const { return chain_.back().sb; }
    uint64_t height() const { return head().height; }
    const std::vector<Entry>& chain() const { return chain_; }
    bool committed_block(const Digest& d) const { return committed_ids_.count(d) > 0; }

    // -- pending blocks ------------------------------------------------------

    /// A locked+disseminated block becomes pending until committed.
    void add_pending(ClusterId cluster, ViewId local_view, const Digest& d);

    /// Cluster's locked, disseminated, uncommitted blocks in local order.
    std::vector<Digest> pending_blocks(ClusterId cluster) const;

    /// (local_view, digest) pairs, for re-dissemination bookkeeping.
    std::vector<std::pair<ViewId, Digest>> pending_with_views(ClusterId cluster) const;

    // -- durability evidence -------------------------------------------------

    /// Count `acker` of `cluster` as confirming storage of `block`. The
    /// cluster counts as a storing cluster once f_j+1 distinct replicas of it
    /// confirmed. Returns true when this ack newly confirmed the cluster.
    bool record_durability(const Digest& block, ClusterId cluster, uint32_t acker);

    /// The origin's lock certificate already proves f_i+1 of its replicas
    /// hold the block; credit the origin cluster outright.
    void credit_origin(const Digest& block, ClusterId origin);

    uint32_t durable_clusters(const Digest& block) const;
    bool is_durable(const Digest& block) const {
        return durable_clusters(block) >= topo_.global_quorum();
    }

    // -- superblock validation and selection ----------------------------------

    /// Full acceptance check for a proposal extending this replica's chain
    /// head: prev linkage, size bound, per-cluster local-order preservation
    /// without gaps against the pending lists, durability of every id, and
    /// no recommitted ids.
    Validation validate_superblock(const SuperBlock& sb, const BlockStore& blocks) const;

    /// Same check against an explicit extension point (prepared-but-unexecuted
    /// suffix): `extra_committed` holds ids claimed by suffix superblocks.
    /// Co-signing paths pass require_ack_durability=false: holding the block
    /// is what the signature attests, so an F+1-cluster prepare certificate
    /// itself establishes F+1-cluster storage; the ack map only pre-filters
    /// the leader's selection.
    Validation validate_superblock_at(const SuperBlock& sb, const BlockStore& blocks,
                                      const Digest& expected_prev,
                                      uint64_t expected_height,
                                      const std::set<Digest>& extra_committed,
                                      bool require_ack_durability = true) const;

    /// Structural gate applied when appending a decided superblock. Durability
    /// and gap-freedom were cluster-confirmed at prepare time and are not
    /// re-imposed here; a lagging replica must still converge to the decided
    /// chain.
    Validation validate_structural(const SuperBlock& sb, const BlockStore& blocks) const;

    std::vector<BlockRef> missing_blocks(const SuperBlock& sb,
                                         const BlockStore& blocks) const;

    /// Leader-side block pick: round-robin across clusters, per-cluster
    /// durable pending prefixes in local order, at most k_max ids.
    std::vector<BlockRef> select_blocks(const BlockStore& blocks,
                                        const std::set<Digest>& extra_committed) const;

    // -- append & execute ------------------------------------------------------

    /// Extends the chain by one superblock (sb.prev must equal the head
    /// digest) and executes its transactions in superblock order, block
    /// order, then intra-block order, skipping already-executed txids.
    std::vector<ExecutedTx> append_and_execute(const SuperBlock& sb,
                                               std::optional<GlobalCertificate> cert,
                                               const BlockStore& blocks);

    std::optional<uint64_t> executed_height(const Digest& txid) const;

    // -- exports ----------------------------------------------------------------

    /// Line-delimited chain export for cross-replica diffing.
    std::vector<std::string> export_chain() const;

    /// Digest of the application state (sorted key-value pairs).
    Digest kv_digest() const;
    const std::map<Bytes, Bytes>& kv() const { return kv_; }

private:
    Validation check_ids(const SuperBlock& sb, const BlockStore& blocks,
                         const std::set<Digest>& extra_committed, bool full,
                         bool require_ack_durability) const;

    Topology topo_;
    uint32_t k_max_;
    std::vector<Entry> chain_;
    std::set<Digest> committed_ids_;
    std::map<ClusterId, ViewId> committed_view_;  // highest committed local view
    std::map<ClusterId, std::map<ViewId, Digest>> pending_;
    std::map<Digest, std::map<ClusterId, std::set<uint32_t>>> ackers_;
    std::map<Digest, std::set<ClusterId>> storing_clusters_;
    std::map<Bytes, Bytes> kv_;
    std::map<Digest, uint64_t> executed_;
};

}  // namespace hbft
