#include "hbft/local_engine.hpp"

#include <algorithm>

namespace hbft {

LocalEngine::LocalEngine(const Topology* topo, const KeyRegistry* registry,
                         const Params* params, ReplicaId me, Mempool* mempool,
                         Callbacks cb)
    : topo_(topo),
      registry_(registry),
      params_(params),
      me_(me),
      mempool_(mempool),
      cb_(std::move(cb)) {
    // Local genesis: view 0, sealed by definition.
    Digest g = Block::genesis_digest(me_.cluster);
    Block genesis;
    genesis.origin = me_.cluster;
    genesis.local_view = 0;
    genesis.digest = g;
    blocks_.emplace(g, genesis);
    sealed_.insert(g);
    chain_head_ = g;
    prepared_ = g;
    locked_ = g;
}

void LocalEngine::start(ReplicaContext& ctx) {
    view_timer_gen_ = ctx.set_timer(TimerKind::LocalView, params_->delta_local);
    NewViewL nv{view_, prepared_view_, prepared_, prepared_qc_};
    ReplicaId leader = local_leader(view_);
    if (leader == me_) {
        handle_new_view(nv, me_, ctx);
    } else {
        ctx.send(Address::of(leader), Layer::Local, nv);
    }
}

void LocalEngine::broadcast(const MsgBody& body, ReplicaContext& ctx) {
    for (uint32_t k = 0; k < topo_->size(me_.cluster); ++k) {
        if (k == me_.index) continue;
        ctx.send(Address::of(ReplicaId{me_.cluster, k}), Layer::Local, body);
    }
}

std::set<Digest> LocalEngine::uncommitted_ancestry_txids(const Digest& head) const {
    std::set<Digest> out;
    Digest cur = head;
    while (!sealed_.count(cur)) {
        auto it = blocks_.find(cur);
        if (it == blocks_.end()) break;
        for (const auto& tx : it->second.txs) out.insert(tx.txid);
        cur = it->second.parent;
    }
    return out;
}

void LocalEngine::handle_new_view(const NewViewL& m, ReplicaId from, ReplicaContext& ctx) {
    if (m.view < view_ || m.view > view_ + 2) return;
    if (m.prepared_view > 0) {
        // The claimed prepared block must carry its prepare quorum.
        if (!m.prepare_qc) return;
        Digest payload = local_vote_payload(me_.cluster, LocalPhase::Prepare,
                                            m.prepared_view, m.prepared);
        if (m.prepare_qc->cluster != me_.cluster ||
            !registry_->verify_cluster(*m.prepare_qc, payload))
            return;
    } else if (m.prepared != Block::genesis_digest(me_.cluster)) {
        return;
    }
    new_views_[m.view][from.index] = m;
    try_propose(ctx);
}

void LocalEngine::try_propose(ReplicaContext& ctx) {
    if (proposal_ || view_done_) return;
    if (!is_leader(view_)) return;
    auto it = new_views_.find(view_);
    if (it == new_views_.end()) return;
    if (it->second.size() < topo_->confirm_quorum(me_.cluster)) return;

    // Extend the highest prepared block among the collected new-views.
    const NewViewL* best = nullptr;
    for (const auto& [idx, nv] : it->second) {
        if (!best || nv.prepared_view > best->prepared_view ||
            (nv.prepared_view == best->prepared_view &&
             nv.prepared.bytes < best->prepared.bytes))
            best = &nv;
    }

    // Backpressure: when enough locked blocks already await global
    // commitment, keep the view ticking with heartbeats instead of growing
    // the backlog.
    std::vector<Transaction> txs;
    if (cb_.pending_backlog() < params_->pending_cap) {
        auto exclude = uncommitted_ancestry_txids(best->prepared);
        txs = mempool_->front(params_->block_size, exclude);
    }
    Block block = Block::make(me_.cluster, view_, best->prepared, std::move(txs));
    blocks_.emplace(block.digest, block);
    proposal_ = block.digest;

    ctx.trace(TraceEv::ProposeL, Layer::Local, view_, block.txs.size(), block.digest);
    ProposeL prop{view_, block, best->prepared_view, best->prepare_qc};
    broadcast(prop, ctx);
    handle_propose(prop, me_, ctx);
}

void LocalEngine::handle_propose(const ProposeL& m, ReplicaId from, ReplicaContext& ctx) {
    if (m.view != view_ || view_done_) return;  // stale or early: silent reject
    if (from != local_leader(m.view)) return;
    const Block& b = m.block;
    if (b.origin != me_.cluster || b.local_view != m.view) return;
    if (b.txs.size() > params_->block_size) return;
    if (Block::compute_digest(b) != b.digest) return;
    if (b.parent == Block::genesis_digest(me_.cluster)) {
        if (m.justify_view != 0) return;
    } else {
        if (!m.justify_qc) return;
        Digest payload =
            local_vote_payload(me_.cluster, LocalPhase::Prepare, m.justify_view, b.parent);
        if (!registry_->verify_cluster(*m.justify_qc, payload)) return;
    }
    // Safety rule: extend the locked block, or carry a higher-view prepare
    // justification.
    bool extends_locked = b.parent == locked_;
    if (!extends_locked && m.justify_view <= locked_view_) return;

    auto voted = last_voted_.find(LocalPhase::Prepare);
    if (voted != last_voted_.end() && voted->second >= m.view) return;
    last_voted_[LocalPhase::Prepare] = m.view;

    blocks_.emplace(b.digest, b);
    send_vote(LocalPhase::Prepare, b.digest, ctx);
}

void LocalEngine::send_vote(LocalPhase phase, const Digest& d, ReplicaContext& ctx) {
    Digest payload = local_vote_payload(me_.cluster, phase, view_, d);
    VoteL vote{phase, view_, d, registry_->sign(me_, payload)};
    ReplicaId leader = local_leader(view_);
    if (leader == me_) {
        handle_vote(vote, me_, ctx);
    } else {
        ctx.send(Address::of(leader), Layer::Local, vote);
    }
}

void LocalEngine::handle_vote(const VoteL& m, ReplicaId from, ReplicaContext& ctx) {
    if (m.view != view_ || !proposal_ || m.block != *proposal_) return;
    if (!is_leader(view_)) return;
    Digest payload = local_vote_payload(me_.cluster, m.phase, m.view, m.block);
    if (m.part.signer != from || !registry_->verify_partial(m.part, payload)) return;
    auto& bucket = votes_[m.phase];
    bucket.emplace(from.index, m.part);
    if (bucket.size() < topo_->local_quorum(me_.cluster)) return;
    if (qc_sent_.count(m.phase)) return;
    std::vector<PartialSignature> parts;
    for (const auto& [idx, p] : bucket) parts.push_back(p);
    auto combined = registry_->combine(parts, me_.cluster, topo_->local_quorum(me_.cluster));
    if (!combined) return;
    qc_sent_.insert(m.phase);
    QCertL qc{m.phase, m.view, m.block, combined.take()};
    broadcast(qc, ctx);
    process_qcert(qc, ctx);
}

void LocalEngine::handle_qcert(const QCertL& m, ReplicaId from, ReplicaContext& ctx) {
    (void)from;
    if (m.view != view_ || view_done_) return;
    Digest payload = local_vote_payload(me_.cluster, m.phase, m.view, m.block);
    if (m.qc.cluster != me_.cluster || !registry_->verify_cluster(m.qc, payload)) {
        ctx.trace(TraceEv::Drop, Layer::Local, m.view, 0, m.block, "reason=bad_local_qc");
        return;
    }
    process_qcert(m, ctx);
}

void LocalEngine::process_qcert(const QCertL& m, ReplicaContext& ctx) {
    switch (m.phase) {
        case LocalPhase::Prepare: {
            if (m.view > prepared_view_) {
                prepared_ = m.block;
                prepared_view_ = m.view;
                prepared_qc_ = m.qc;
            }
            if (last_voted_[LocalPhase::Precommit] < m.view &&
                blocks_.count(m.block)) {
                last_voted_[LocalPhase::Precommit] = m.view;
                send_vote(LocalPhase::Precommit, m.block, ctx);
            }
            break;
        }
        case LocalPhase::Precommit: {
            if (m.view > locked_view_) {
                locked_ = m.block;
                locked_view_ = m.view;
            }
            if (last_voted_[LocalPhase::Commit] < m.view && blocks_.count(m.block)) {
                last_voted_[LocalPhase::Commit] = m.view;
                send_vote(LocalPhase::Commit, m.block, ctx);
            }
            break;
        }
        case LocalPhase::Commit: {
            if (view_done_) break;
            view_done_ = true;
            fail_streak_ = 0;
            auto it = blocks_.find(m.block);
            if (it != blocks_.end()) {
                sealed_.insert(m.block);
                chain_head_ = m.block;
                chain_head_view_ = m.view;
                LockCertificate cert{m.block, me_.cluster, m.view, m.qc};
                ctx.trace(TraceEv::Lock, Layer::Local, m.view, it->second.txs.size(),
                          m.block);
                mempool_->consume(it->second.txs);
                cb_.on_locked(it->second, cert);
            }
            // Pace the next view rather than spinning at message speed.
            pace_timer_gen_ = ctx.set_timer(TimerKind::LocalPace, params_->local_view_pace);
            break;
        }
    }
}

void LocalEngine::advance_view(bool timed_out, ReplicaContext& ctx) {
    if (timed_out) {
        fail_streak_ = std::min(fail_streak_ + 1, params_->backoff_cap);
        ctx.trace(TraceEv::Timeout, Layer::Local, view_, fail_streak_, Digest{});
    }
    view_ += 1;
    view_done_ = false;
    proposal_.reset();
    votes_.clear();
    qc_sent_.clear();
    new_views_.erase(new_views_.begin(), new_views_.upper_bound(view_ - 1));
    ctx.trace(TraceEv::ViewL, Layer::Local, view_, timed_out ? 1 : 0, Digest{});

    uint64_t timeout = params_->delta_local << std::min(fail_streak_, params_->backoff_cap);
    view_timer_gen_ = ctx.set_timer(TimerKind::LocalView, timeout);

    NewViewL nv{view_, prepared_view_, prepared_, prepared_qc_};
    ReplicaId leader = local_leader(view_);
    if (leader == me_) {
        handle_new_view(nv, me_, ctx);
    } else {
        ctx.send(Address::of(leader), Layer::Local, nv);
    }
}

void LocalEngine::on_timer(TimerKind kind, uint64_t gen, ReplicaContext& ctx) {
    if (kind == TimerKind::LocalPace) {
        if (gen != pace_timer_gen_ || !view_done_) return;
        advance_view(/*timed_out=*/false, ctx);
    } else if (kind == TimerKind::LocalView) {
        if (gen != view_timer_gen_) return;
        if (view_done_) return;  // pace timer will advance us
        advance_view(/*timed_out=*/true, ctx);
    }
}

}  // namespace hbft
