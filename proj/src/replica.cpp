#include "hbft/replica.hpp"

#include "hbft/dissemination.hpp"

namespace hbft {

Replica::Replica(const Topology* topo, const KeyRegistry* registry, const Params* params,
                 ReplicaId me)
    : topo_(topo),
      registry_(registry),
      params_(params),
      me_(me),
      chain_(*topo, params->k_max),
      local_(topo, registry, params, me, &mempool_,
             LocalEngine::Callbacks{
                 [this]() { return global_.view(); },
                 [this]() { return chain_.pending_blocks(me_.cluster).size(); },
                 [this](const Block& b, const LockCertificate& c) {
                     on_locked(b, c, *pending_ctx_);
                 }}),
      global_(topo, registry, params, me, &chain_, &blocks_,
              GlobalEngine::Callbacks{[this](const std::vector<ExecutedTx>& txs) {
                  on_executed(txs, *pending_ctx_);
              }}) {}

void Replica::start(ReplicaContext& ctx) {
    pending_ctx_ = &ctx;
    local_.start(ctx);
    global_.start(ctx);
    redissem_timer_gen_ = ctx.set_timer(TimerKind::Redisseminate,
                                        params_->redisseminate_interval);
}

void Replica::on_message(const Message& m, ReplicaContext& ctx) {
    pending_ctx_ = &ctx;
    if (m.from.is_client) {
        if (const auto* sub = std::get_if<ClientSubmit>(&m.body))
            handle_client_submit(*sub, m.from, ctx);
        return;
    }
    ReplicaId from = m.from.replica;
    std::visit(
        [&](const auto& body) {
            using T = std::decay_t<decltype(body)>;
            if constexpr (std::is_same_v<T, NewViewL>)
                local_.handle_new_view(body, from, ctx);
            else if constexpr (std::is_same_v<T, ProposeL>)
                local_.handle_propose(body, from, ctx);
            else if constexpr (std::is_same_v<T, VoteL>)
                local_.handle_vote(body, from, ctx);
            else if constexpr (std::is_same_v<T, QCertL>)
                local_.handle_qcert(body, from, ctx);
            else if constexpr (std::is_same_v<T, BlockMsg>)
                handle_block_msg(body, from, ctx);
            else if constexpr (std::is_same_v<T, StoreAck>)
                handle_store_ack(body, from, ctx);
            else if constexpr (std::is_same_v<T, BlockFetchReq>)
                global_.handle_block_fetch_req(body, from, ctx);
            else if constexpr (std::is_same_v<T, BlockFetchResp>)
                global_.handle_block_fetch_resp(body, from, ctx);
            else if constexpr (std::is_same_v<T, SbFetchReq>)
                global_.handle_sb_fetch_req(body, from, ctx);
            else if constexpr (std::is_same_v<T, SbFetchResp>)
                global_.handle_sb_fetch_resp(body, from, ctx);
            else if constexpr (std::is_same_v<T, NewViewG>)
                global_.handle_new_view(body, from, ctx);
            else if constexpr (std::is_same_v<T, PrepareG>)
                global_.handle_prepare(body, from, ctx);
            else if constexpr (std::is_same_v<T, PrepConfirmG>)
                global_.handle_prep_confirm(body, from, ctx);
            else if constexpr (std::is_same_v<T, PrecommitG>)
                global_.handle_precommit(body, from, ctx);
            else if constexpr (std::is_same_v<T, PcomConfirmG>)
                global_.handle_pcom_confirm(body, from, ctx);
            else if constexpr (std::is_same_v<T, DecideG>)
                global_.handle_decide(body, from, ctx);
            else if constexpr (std::is_same_v<T, SignRequest>)
                global_.handle_sign_request(body, from, ctx);
            else if constexpr (std::is_same_v<T, SignReply>)
                global_.handle_sign_reply(body, from, ctx);
            else if constexpr (std::is_same_v<T, ExtSignRequest>)
                global_.handle_ext_sign_request(body, from, ctx);
            else if constexpr (std::is_same_v<T, ExtSignReply>)
                global_.handle_ext_sign_reply(body, from, ctx);
        },
        m.body);
}

void Replica::on_timer(TimerKind kind, uint64_t gen, ReplicaContext& ctx) {
    pending_ctx_ = &ctx;
    switch (kind) {
        case TimerKind::LocalView:
        case TimerKind::LocalPace:
            local_.on_timer(kind, gen, ctx);
            break;
        case TimerKind::GlobalView:
        case TimerKind::FetchRetry:
            global_.on_timer(kind, gen, ctx);
            break;
        case TimerKind::Redisseminate:
            if (gen != redissem_timer_gen_) return;
            redisseminate(ctx);
            redissem_timer_gen_ =
                ctx.set_timer(TimerKind::Redisseminate, params_->redisseminate_interval);
            break;
    }
}

void Replica::on_locked(const Block& block, const LockCertificate& cert,
                        ReplicaContext& ctx) {
    if (block.empty()) return;  // heartbeat: keeps rotation alive, nothing to share
    if (blocks_.put(block, cert, ctx.now())) {
        chain_.add_pending(block.origin, block.local_view, block.digest);
        chain_.credit_origin(block.digest, block.origin);
        chain_.record_durability(block.digest, me_.cluster, me_.index);
        ctx.trace(TraceEv::Store, Layer::Dissem, block.local_view, 0, block.digest);
    }
    ViewId round = block.local_view;
    if (roles::disseminator(*topo_, me_.cluster, round, global_.view()) == me_)
        disseminate(block, cert, round, ctx);
    global_.on_block_available(ctx);
}

void Replica::disseminate(const Block& block, const LockCertificate& cert, ViewId round,
                          ReplicaContext& ctx) {
    last_dissem_[block.digest] = ctx.now();
    ctx.trace(TraceEv::Disseminate, Layer::Dissem, round, block.txs.size(), block.digest);
    BlockMsg msg{block, cert, /*relayed=*/false, round};
    for (ClusterId c = 0; c < topo_->clusters(); ++c) {
        for (const auto& r : dissemination_targets(*topo_, c, round)) {
            if (r == me_) continue;
            ctx.send(Address::of(r), Layer::Dissem, msg);
        }
    }
}

void Replica::redisseminate(ReplicaContext& ctx) {
    // Taking office as disseminator: re-send locked-but-uncommitted blocks of
    // this cluster that still lack durability or have gone stale.
    ViewId lv = local_.view();
    if (roles::disseminator(*topo_, me_.cluster, lv, global_.view()) != me_) return;
    for (const auto& [view, d] : chain_.pending_with_views(me_.cluster)) {
        const auto* entry = blocks_.find(d);
        if (!entry) continue;
        auto it = last_dissem_.find(d);
        if (it != last_dissem_.end() &&
            ctx.now() - it->second < params_->redisseminate_interval)
            continue;
        if (chain_.is_durable(d) && it != last_dissem_.end()) continue;
        disseminate(entry->block, entry->cert, lv, ctx);
    }
}

void Replica::send_acks_if_target(const Block& block, ViewId round, ReplicaContext& ctx) {
    if (acked_.count(block.digest)) return;
    bool am_target = false;
    for (const auto& r : dissemination_targets(*topo_, me_.cluster, round))
        am_target |= (r == me_);
    if (!am_target) return;
    acked_.insert(block.digest);
    ctx.trace(TraceEv::Ack, Layer::Dissem, round, 0, block.digest);
    StoreAck ack{block.digest, block.origin};
    for (ClusterId c = 0; c < topo_->clusters(); ++c) {
        for (uint32_t k = 0; k < topo_->size(c); ++k) {
            ReplicaId r{c, k};
            if (r == me_) continue;
            ctx.send(Address::of(r), Layer::Dissem, ack);
        }
    }
}

void Replica::handle_block_msg(const BlockMsg& m, ReplicaId from, ReplicaContext& ctx) {
    if (blocks_.contains(m.block.digest)) {
        // Seen already: no relay, no fresh ack — but a relayed copy is still
        // evidence that the sender stores the block.
        if (m.relayed && from.cluster == me_.cluster)
            chain_.record_durability(m.block.digest, from.cluster, from.index);
        return;
    }
    if (!verify_locked(m.block, m.cert, *registry_)) {
        ctx.trace(TraceEv::Drop, Layer::Dissem, m.round, 0, m.block.digest,
                  "reason=bad_lock_cert");
        return;
    }
    blocks_.put(m.block, m.cert, ctx.now());
    chain_.add_pending(m.block.origin, m.block.local_view, m.block.digest);
    chain_.credit_origin(m.block.digest, m.block.origin);
    chain_.record_durability(m.block.digest, me_.cluster, me_.index);
    if (m.relayed && from.cluster == me_.cluster)
        chain_.record_durability(m.block.digest, from.cluster, from.index);
    ctx.trace(TraceEv::Store, Layer::Dissem, m.block.local_view, m.relayed ? 1 : 0,
              m.block.digest);

    if (!m.relayed) {
        // First direct receipt: relay to local peers.
        BlockMsg relay{m.block, m.cert, /*relayed=*/true, m.round};
        for (uint32_t k = 0; k < topo_->size(me_.cluster); ++k) {
            if (k == me_.index) continue;
            ctx.send(Address::of(ReplicaId{me_.cluster, k}), Layer::Dissem, relay);
        }
    }
    send_acks_if_target(m.block, m.round, ctx);

    // Mempool hygiene: transactions sealed by another cluster's block should
    // not be proposed again here (clients may have retransmitted them).
    for (const auto& tx : m.block.txs) mempool_.mark_consumed(tx.txid);
    global_.on_block_available(ctx);
}

void Replica::handle_store_ack(const StoreAck& m, ReplicaId from, ReplicaContext& ctx) {
    bool newly = chain_.record_durability(m.block, from.cluster, from.index);
    if (newly && chain_.is_durable(m.block))
        ctx.trace(TraceEv::Durable, Layer::Dissem, 0, chain_.durable_clusters(m.block),
                  m.block);
}

void Replica::handle_client_submit(const ClientSubmit& m, const Address& from,
                                   ReplicaContext& ctx) {
    const Transaction& tx = m.tx;
    if (Transaction::compute_txid(tx.client, tx.seq, tx.payload) != tx.txid) return;
    client_facing_.insert(tx.txid);
    if (auto h = chain_.executed_height(tx.txid)) {
        // Retransmission of something already durable: answer immediately.
        ctx.send(from, Layer::Client, ClientReplyMsg{tx.txid, *h, 1});
        ctx.trace(TraceEv::Reply, Layer::Client, 0, *h, tx.txid, "s=1");
        return;
    }
    mempool_.add(tx);
}

void Replica::on_executed(const std::vector<ExecutedTx>& txs, ReplicaContext& ctx) {
    for (const auto& t : txs) {
        if (!client_facing_.count(t.txid)) continue;
        ctx.send(Address::of_client(t.client), Layer::Client,
                 ClientReplyMsg{t.txid, t.height, t.status});
        ctx.trace(TraceEv::Reply, Layer::Client, 0, t.height, t.txid,
                  t.status ? "s=1" : "s=0");
    }
}

}  // namespace hbft
