#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>

#include "hbft/context.hpp"
#include "hbft/crypto.hpp"
#include "hbft/mempool.hpp"
#include "hbft/params.hpp"
#include "hbft/roles.hpp"

namespace hbft {

/// In-cluster ordering: per-view proposal, prepare/pre-commit/commit voting,
/// LockCertificate on commit quorum. Execution is deferred — the commit
/// quorum only seals the block for dissemination and global inclusion.
class LocalEngine {
public:
    struct Callbacks {
        std::function<ViewId()> global_view;  // current global view, for the skip rule
        std::function<size_t()> pending_backlog;  // cluster blocks not yet committed
        std::function<void(const Block&, const LockCertificate&)> on_locked;
    };

    LocalEngine(const Topology* topo, const KeyRegistry* registry, const Params* params,
                ReplicaId me, Mempool* mempool, Callbacks cb);

    void start(ReplicaContext& ctx);
    void handle_new_view(const NewViewL& m, ReplicaId from, ReplicaContext& ctx);
    void handle_propose(const ProposeL& m, ReplicaId from, ReplicaContext& ctx);
    void handle_vote(const VoteL& m, ReplicaId from, ReplicaContext& ctx);
    void handle_qcert(const QCertL& m, ReplicaId from, ReplicaContext& ctx);
    void on_timer(TimerKind kind, uint64_t gen, ReplicaContext& ctx);

    ViewId view() const { return view_; }
    ViewId prepared_view() const { return prepared_view_; }
    ViewId locked_view() const { return locked_view_; }
    const Block* block_of(const Digest& d) const {
        auto it = blocks_.find(d);
        return it == blocks_.end() ? nullptr : &it->second;
    }

private:
    ReplicaId local_leader(ViewId v) const {
        return roles::local_leader(*topo_, me_.cluster, v, cb_.global_view());
    }
    bool is_leader(ViewId v) const { return local_leader(v) == me_; }

    void try_propose(ReplicaContext& ctx);
    void advance_view(bool timed_out, ReplicaContext& ctx);
    void broadcast(const MsgBody& body, ReplicaContext& ctx);
    void send_vote(LocalPhase phase, const Digest& d, ReplicaContext& ctx);
    void process_qcert(const QCertL& m, ReplicaContext& ctx);
    std::set<Digest> uncommitted_ancestry_txids(const Digest& head) const;

    const Topology* topo_;
    const KeyRegistry* registry_;
    const Params* params_;
    ReplicaId me_;
    Mempool* mempool_;
    Callbacks cb_;

    ViewId view_ = 1;

    // Highest prepare-quorum block and highest pre-commit-quorum block.
    Digest prepared_;
    ViewId prepared_view_ = 0;
    std::optional<ClusterSignature> prepared_qc_;
    Digest locked_;
    ViewId locked_view_ = 0;

    std::map<Digest, Block> blocks_;  // every proposal seen, genesis included
    std::set<Digest> sealed_;         // blocks with a commit-quorum certificate
    Digest chain_head_;               // latest sealed block
    ViewId chain_head_view_ = 0;

    // Leader-side collections, keyed by view.
    std::map<ViewId, std::map<uint32_t, NewViewL>> new_views_;
    std::optional<Digest> proposal_;  // digest proposed by me in view_
    std::map<LocalPhase, std::map<uint32_t, PartialSignature>> votes_;
    std::set<LocalPhase> qc_sent_;

    std::map<LocalPhase, ViewId> last_voted_;  // one vote per phase per view
    bool view_done_ = false;
    uint32_t fail_streak_ = 0;
    uint64_t view_timer_gen_ = 0;
    uint64_t pace_timer_gen_ = 0;
};

}  // namespace hbft
