#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hbft/bytes.hpp"
#include "hbft/digest.hpp"

namespace hbft {

using ClusterId = uint32_t;
using ViewId = uint64_t;

struct ReplicaId {
    ClusterId cluster = 0;
    uint32_t index = 0;

    auto operator<=>(const ReplicaId&) const = default;

    std::string str() const {
        return std::to_string(cluster) + "." + std::to_string(index);
    }
};

/// Domain separation tags for everything we hash or sign. One byte, first in
/// every canonical payload, so payloads of different kinds can never collide.
enum class Tag : uint8_t {
    Transaction = 1,
    Block = 2,
    SuperBlock = 3,
    LocalVote = 4,
    Confirmation = 5,
    ExtensionDraft = 6,
    ExtensionFinal = 7,
    PartialSig = 8,
    KeyDerive = 9,
    LocalGenesis = 10,
};

// ---------------------------------------------------------------------------
// Transactions and blocks (cluster-local chain)
// ---------------------------------------------------------------------------

struct Transaction {
    uint64_t client = 0;
    uint64_t seq = 0;
    Bytes payload;
    Digest txid;

    static Digest compute_txid(uint64_t client, uint64_t seq, const Bytes& payload) {
        Encoder e;
        e.u8(static_cast<uint8_t>(Tag::Transaction)).u64(client).u64(seq).bytes(payload);
        return hash(e.out());
    }

    static Transaction make(uint64_t client, uint64_t seq, Bytes payload) {
        Transaction t{client, seq, std::move(payload), {}};
        t.txid = compute_txid(t.client, t.seq, t.payload);
        return t;
    }

    void encode(Encoder& e) const {
        e.u64(client).u64(seq).bytes(payload);
    }
};

struct Block {
    ClusterId origin = 0;
    ViewId local_view = 0;
    Digest parent;
    std::vector<Transaction> txs;
    Digest digest;

    bool empty() const { return txs.empty(); }

    static Digest compute_digest(const Block& b) {
        Encoder e;
        e.u8(static_cast<uint8_t>(Tag::Block)).u32(b.origin).u64(b.local_view);
        e.fixed(b.parent.bytes);
        e.u32(static_cast<uint32_t>(b.txs.size()));
        for (const auto& t : b.txs) t.encode(e);
        return hash(e.out());
    }

    static Block make(ClusterId origin, ViewId view, Digest parent,
                      std::vector<Transaction> txs) {
        Block b{origin, view, parent, std::move(txs), {}};
        b.digest = compute_digest(b);
        return b;
    }

    /// Root of each cluster's local chain; view 0 is reserved for it.
    static Digest genesis_digest(ClusterId cluster) {
        Encoder e;
        e.u8(static_cast<uint8_t>(Tag::LocalGenesis)).u32(cluster);
        return hash(e.out());
    }
};

// ---------------------------------------------------------------------------
// Signatures
// ---------------------------------------------------------------------------

struct PartialSignature {
    ReplicaId signer;
    Digest payload;  // digest of the signed payload, kept for bookkeeping
    Digest tag;

    auto operator<=>(const PartialSignature&) const = default;
};

/// Quorum multi-signature: >= 2f_i+1 distinct partials of one cluster over
/// one payload. Parts are kept sorted by signer index.
struct ClusterSignature {
    ClusterId cluster = 0;
    std::vector<PartialSignature> parts;

    auto operator<=>(const ClusterSignature&) const = default;

    void encode(Encoder& e) const {
        e.u32(cluster);
        e.u32(static_cast<uint32_t>(parts.size()));
        for (const auto& p : parts) {
            e.u32(p.signer.cluster).u32(p.signer.index);
            e.fixed(p.payload.bytes);
            e.fixed(p.tag.bytes);
        }
    }
};

/// Local phases of the in-cluster consensus. Commit-quorum output is the
/// LockCertificate handed to dissemination.
enum class LocalPhase : uint8_t { Prepare = 1, Precommit = 2, Commit = 3 };

inline Digest local_vote_payload(ClusterId cluster, LocalPhase ph, ViewId view,
                                 const Digest& block) {
    Encoder e;
    e.u8(static_cast<uint8_t>(Tag::LocalVote))
        .u32(cluster)
        .u8(static_cast<uint8_t>(ph))
        .u64(view);
    e.fixed(block.bytes);
    return hash(e.out());
}

struct LockCertificate {
    Digest block;
    ClusterId cluster = 0;
    ViewId local_view = 0;
    ClusterSignature sig;

    Digest signed_payload() const {
        return local_vote_payload(cluster, LocalPhase::Commit, local_view, block);
    }
};

// ---------------------------------------------------------------------------
// Superblocks and global-layer certificates
// ---------------------------------------------------------------------------

struct BlockRef {
    ClusterId cluster = 0;
    Digest digest;

    auto operator<=>(const BlockRef&) const = default;
};

struct SuperBlock {
    Digest prev;
    uint64_t height = 0;
    ViewId view = 0;
    std::vector<BlockRef> block_ids;
    Digest digest;

    static Digest compute_digest(const SuperBlock& sb) {
        Encoder e;
        e.u8(static_cast<uint8_t>(Tag::SuperBlock));
        e.fixed(sb.prev.bytes);
        e.u64(sb.height).u64(sb.view);
        e.u32(static_cast<uint32_t>(sb.block_ids.size()));
        for (const auto& r : sb.block_ids) {
            e.u32(r.cluster);
            e.fixed(r.digest.bytes);
        }
        return hash(e.out());
    }

    static SuperBlock make(Digest prev, uint64_t height, ViewId view,
                           std::vector<BlockRef> ids) {
        SuperBlock sb{prev, height, view, std::move(ids), {}};
        sb.digest = compute_digest(sb);
        return sb;
    }

    /// Height-0 superblock every replica starts from, considered prepared at
    /// view 0 by all clusters.
    static const SuperBlock& genesis() {
        static const SuperBlock g = make(Digest::zero(), 0, 0, {});
        return g;
    }
};

/// Global phases carried inside cluster confirmations.
enum class GlobalPhase : uint8_t { NewView = 0, Prepare = 1, Precommit = 2 };

inline const char* phase_name(GlobalPhase p) {
    switch (p) {
        case GlobalPhase::NewView: return "nv";
        case GlobalPhase::Prepare: return "prep";
        case GlobalPhase::Precommit: return "pcom";
    }
    return "?";
}

inline Digest confirmation_payload(const std::optional<Digest>& h, ViewId v,
                                   const std::optional<Digest>& h_prime, ViewId v_prime,
                                   GlobalPhase ph) {
    Encoder e;
    e.u8(static_cast<uint8_t>(Tag::Confirmation));
    e.u8(h ? 1 : 0);
    if (h) e.fixed(h->bytes);
    e.u64(v);
    e.u8(h_prime ? 1 : 0);
    if (h_prime) e.fixed(h_prime->bytes);
    e.u64(v_prime);
    e.u8(static_cast<uint8_t>(ph));
    return hash(e.out());
}

/// Cluster confirmation: the statement one cluster co-signs during a global
/// phase. Substitute for the trusted component on the global layer.
struct ClusterConfirmation {
    std::optional<Digest> h;        // superblock voted on (null in new-view)
    ViewId v = 0;                   // global view
    std::optional<Digest> h_prime;  // carried prepared superblock
    ViewId v_prime = 0;
    GlobalPhase ph = GlobalPhase::NewView;
    ClusterId clid = 0;
    ClusterSignature sig;

    auto operator<=>(const ClusterConfirmation&) const = default;

    Digest signed_payload() const {
        return confirmation_payload(h, v, h_prime, v_prime, ph);
    }

    void encode(Encoder& e) const {
        e.u8(h ? 1 : 0);
        if (h) e.fixed(h->bytes);
        e.u64(v);
        e.u8(h_prime ? 1 : 0);
        if (h_prime) e.fixed(h_prime->bytes);
        e.u64(v_prime);
        e.u8(static_cast<uint8_t>(ph));
        e.u32(clid);
        sig.encode(e);
    }

    Bytes encoded() const {
        Encoder e;
        encode(e);
        return e.take();
    }
};

/// Confirmations from F+1 distinct clusters over one matching statement.
struct GlobalCertificate {
    std::vector<ClusterConfirmation> confs;

    auto operator<=>(const GlobalCertificate&) const = default;

    void encode(Encoder& e) const {
        e.u32(static_cast<uint32_t>(confs.size()));
        for (const auto& c : confs) c.encode(e);
    }

    Bytes encoded() const {
        Encoder e;
        encode(e);
        return e.take();
    }
};

// ---------------------------------------------------------------------------
// Extensions (leader-cluster certification of the highest prepared superblock)
// ---------------------------------------------------------------------------

inline Digest extension_draft_payload(ViewId v, ViewId v_prime,
                                      const std::optional<Digest>& h_prime,
                                      const std::vector<ClusterId>& contributors) {
    Encoder e;
    e.u8(static_cast<uint8_t>(Tag::ExtensionDraft)).u64(v).u64(v_prime);
    e.u8(h_prime ? 1 : 0);
    if (h_prime) e.fixed(h_prime->bytes);
    e.u32(static_cast<uint32_t>(contributors.size()));
    for (auto c : contributors) e.u32(c);
    return hash(e.out());
}

inline Digest extension_final_payload(ViewId v, ViewId v_prime,
                                      const std::optional<Digest>& h_prime,
                                      uint32_t count) {
    Encoder e;
    e.u8(static_cast<uint8_t>(Tag::ExtensionFinal)).u64(v).u64(v_prime);
    e.u8(h_prime ? 1 : 0);
    if (h_prime) e.fixed(h_prime->bytes);
    e.u32(count);
    return hash(e.out());
}

/// In-progress extension: contributor list still explicit.
struct ExtensionDraft {
    ViewId v = 0;
    ViewId v_prime = 0;
    std::optional<Digest> h_prime;
    std::vector<ClusterId> contributors;
    ClusterSignature sig;  // leader-cluster signature over the draft payload

    Digest signed_payload() const {
        return extension_draft_payload(v, v_prime, h_prime, contributors);
    }
};

/// Finalized extension: contributor list collapsed to its cardinality.
struct Extension {
    ViewId v = 0;
    ViewId v_prime = 0;
    std::optional<Digest> h_prime;
    uint32_t count = 0;
    ClusterSignature sig;

    auto operator<=>(const Extension&) const = default;

    Digest signed_payload() const {
        return extension_final_payload(v, v_prime, h_prime, count);
    }
};

}  // namespace hbft

namespace hbft {

/// Wire decoding for the certificate forms that travel through traces.
ClusterSignature decode_cluster_signature(Decoder& d);
ClusterConfirmation decode_confirmation(Decoder& d);
GlobalCertificate decode_certificate(Decoder& d);

}  // namespace hbft
