#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>

#include "hbft/chain_store.hpp"
#include "hbft/context.hpp"
#include "hbft/crypto.hpp"
#include "hbft/global_ops.hpp"
#include "hbft/params.hpp"
#include "hbft/roles.hpp"

namespace hbft {

/// Position in the per-cluster signing sequence: slots advance
/// (v, nv) -> (v, prep) -> (v, pcom) -> (v+1, nv) and each replica co-signs
/// a slot at most once. This is what makes one-confirmation-per-phase a
/// structural property rather than a convention.
struct SlotPos {
    ViewId view = 1;
    GlobalPhase phase = GlobalPhase::NewView;

    uint64_t rank() const { return view * 3 + static_cast<uint64_t>(phase); }
    auto operator<=>(const SlotPos& o) const { return rank() <=> o.rank(); }
    bool operator==(const SlotPos& o) const { return rank() == o.rank(); }

    SlotPos next() const {
        switch (phase) {
            case GlobalPhase::NewView: return {view, GlobalPhase::Prepare};
            case GlobalPhase::Prepare: return {view, GlobalPhase::Precommit};
            case GlobalPhase::Precommit: return {view + 1, GlobalPhase::NewView};
        }
        return {view + 1, GlobalPhase::NewView};
    }
};

/// Global superblock agreement among representatives, every state transition
/// backed by a cluster confirmation. Runs on every replica; the conductor
/// duties (sign rounds, leader phases) activate when the role schedule says
/// so.
class GlobalEngine {
public:
    struct Callbacks {
        std::function<void(const std::vector<ExecutedTx>&)> on_executed;
    };

    GlobalEngine(const Topology* topo, const KeyRegistry* registry, const Params* params,
                 ReplicaId me, ChainStore* chain, BlockStore* blocks, Callbacks cb);

    void start(ReplicaContext& ctx);

    void handle_new_view(const NewViewG& m, ReplicaId from, ReplicaContext& ctx);
    void handle_prepare(const PrepareG& m, ReplicaId from, ReplicaContext& ctx);
    void handle_prep_confirm(const PrepConfirmG& m, ReplicaId from, ReplicaContext& ctx);
    void handle_precommit(const PrecommitG& m, ReplicaId from, ReplicaContext& ctx);
    void handle_pcom_confirm(const PcomConfirmG& m, ReplicaId from, ReplicaContext& ctx);
    void handle_decide(const DecideG& m, ReplicaId from, ReplicaContext& ctx);
    void handle_sign_request(const SignRequest& m, ReplicaId from, ReplicaContext& ctx);
    void handle_sign_reply(const SignReply& m, ReplicaId from, ReplicaContext& ctx);
    void handle_ext_sign_request(const ExtSignRequest& m, ReplicaId from,
                                 ReplicaContext& ctx);
    void handle_ext_sign_reply(const ExtSignReply& m, ReplicaId from, ReplicaContext& ctx);
    void handle_block_fetch_req(const BlockFetchReq& m, ReplicaId from,
                                ReplicaContext& ctx);
    void handle_block_fetch_resp(const BlockFetchResp& m, ReplicaId from,
                                 ReplicaContext& ctx);
    void handle_sb_fetch_req(const SbFetchReq& m, ReplicaId from, ReplicaContext& ctx);
    void handle_sb_fetch_resp(const SbFetchResp& m, ReplicaId from, ReplicaContext& ctx);

    void on_timer(TimerKind kind, uint64_t gen, ReplicaContext& ctx);

    /// A new verified block arrived (dissemination path); committed
    /// superblocks waiting on it may now be executable.
    void on_block_available(ReplicaContext& ctx);

    ViewId view() const { return view_; }
    ViewId prepared_view() const { return prepv_; }
    const Digest& prepared_digest() const { return preph_; }

private:
    enum class Enter { Executed, Timeout, Synced };
    enum class Purpose { NewViewSend, LeaderPrep, RepPrep, LeaderPcom, RepPcom };

    struct SignRound {
        uint64_t id = 0;
        Purpose purpose = Purpose::NewViewSend;
        ViewId view = 0;
        GlobalPhase phase = GlobalPhase::NewView;
        std::optional<Digest> h;
        std::optional<Digest> h_prime;
        ViewId v_prime = 0;
        Digest payload;
        std::map<uint32_t, PartialSignature> parts;
        bool done = false;
    };

    struct ExtRound {
        uint64_t id = 0;
        ExtOp op = ExtOp::Start;
        Digest payload;
        // Draft under construction (contents the signature is over).
        ViewId v = 0;
        ViewId v_prime = 0;
        std::optional<Digest> h_prime;
        std::vector<ClusterId> contributors;
        uint32_t final_count = 0;
        std::map<uint32_t, PartialSignature> parts;
        bool done = false;
    };

    struct LeaderState {
        ViewId view = 0;
        std::vector<ClusterConfirmation> nvs;
        bool ext_started = false;
        std::vector<ClusterConfirmation> iterates;
        size_t iterate_pos = 0;
        std::optional<ExtensionDraft> draft;
        std::optional<Extension> ext;
        std::optional<SuperBlock> proposal;
        std::vector<ClusterConfirmation> preps;
        std::vector<ClusterConfirmation> pcoms;
        bool prepare_sent = false;
        bool precommit_sent = false;
        bool decide_sent = false;
        std::optional<ExtRound> ext_round;
    };

    bool is_rep(ViewId v) const {
        return roles::representative(*topo_, me_.cluster, v) == me_;
    }
    bool is_global_leader(ViewId v) const {
        return roles::global_leader(*topo_, v) == me_;
    }

    void enter_view(ViewId v, Enter reason, ReplicaContext& ctx);
    void conduct(Purpose purpose, ViewId view, GlobalPhase phase, std::optional<Digest> h,
                 std::optional<Digest> h_prime, ViewId v_prime,
                 std::optional<SuperBlock> sb, std::optional<Extension> ext,
                 std::optional<GlobalCertificate> prep_cert, ReplicaContext& ctx);
    std::optional<PartialSignature> co_sign(const SignRequest& m, ReplicaId from,
                                            ReplicaContext& ctx);
    void round_complete(SignRound& round, const ClusterSignature& sig,
                        ReplicaContext& ctx);

    void try_extlist(ReplicaContext& ctx);
    void start_ext_round(ExtOp op, const ClusterConfirmation* phi, ReplicaContext& ctx);
    std::optional<PartialSignature> co_sign_ext(const ExtSignRequest& m, ReplicaId from);
    void ext_round_complete(ExtRound& round, const ClusterSignature& sig,
                            ReplicaContext& ctx);
    void try_propose(ReplicaContext& ctx);
    void try_precommit(ReplicaContext& ctx);
    void try_decide(ReplicaContext& ctx);

    /// Walk prev-links from `tip` back to the chain head through known
    /// superblocks. Returns the suffix oldest-first, or nullopt when content
    /// is missing (missing digests appended to `missing`).
    std::optional<std::vector<SuperBlock>> suffix_to(const Digest& tip,
                                                     std::vector<Digest>* missing) const;

    bool known_committed(const Digest& h) const;

    void try_execute(const Digest& h, ReplicaContext& ctx);
    void retry_pending_exec(ReplicaContext& ctx);
    void request_superblock(const Digest& d, ReplicaContext& ctx);
    void request_block(const BlockRef& ref, ReplicaContext& ctx);
    void arm_fetch_timer(ReplicaContext& ctx);

    const Topology* topo_;
    const KeyRegistry* registry_;
    const Params* params_;
    ReplicaId me_;
    ChainStore* chain_;
    BlockStore* blocks_;
    Callbacks cb_;

    ViewId view_ = 1;
    bool executed_this_view_ = false;
    uint32_t fail_streak_ = 0;
    uint64_t view_timer_gen_ = 0;

    SlotPos cursor_{1, GlobalPhase::NewView};
    Digest preph_;
    ViewId prepv_ = 0;

    std::map<Digest, SuperBlock> known_sbs_;
    std::map<ViewId, std::map<ClusterId, ClusterConfirmation>> nv_buffer_;
    LeaderState leader_;
    std::map<uint64_t, SignRound> rounds_;
    uint64_t next_round_ = 1;

    std::set<ViewId> multicast_done_;
    std::map<Digest, GlobalCertificate> pending_exec_;  // decided, awaiting data

    std::map<Digest, uint32_t> sb_fetches_;     // digest -> attempt
    std::map<Digest, std::pair<ClusterId, uint32_t>> block_fetches_;
    uint64_t fetch_timer_gen_ = 0;
    bool fetch_timer_armed_ = false;
};

}  // namespace hbft
