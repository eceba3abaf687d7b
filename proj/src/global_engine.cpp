#include "hbft/global_engine.hpp"

#include <algorithm>

#include "hbft/dissemination.hpp"

namespace hbft {

namespace {

std::string cert_detail(const GlobalCertificate& cert) {
    return "cert=" + hex_encode(cert.encoded());
}

std::string conf_detail(const ClusterConfirmation& conf) {
    return "conf=" + hex_encode(conf.encoded());
}

/// Statement fields shared by all confirmations of a certificate; null when
/// the certificate is malformed.
struct CertStatement {
    Digest h;
    ViewId v = 0;
};

std::optional<CertStatement> cert_statement(const GlobalCertificate& cert) {
    if (cert.confs.empty() || !cert.confs.front().h) return std::nullopt;
    return CertStatement{*cert.confs.front().h, cert.confs.front().v};
}

}  // namespace

GlobalEngine::GlobalEngine(const Topology* topo, const KeyRegistry* registry,
                           const Params* params, ReplicaId me, ChainStore* chain,
                           BlockStore* blocks, Callbacks cb)
    : topo_(topo),
      registry_(registry),
      params_(params),
      me_(me),
      chain_(chain),
      blocks_(blocks),
      cb_(std::move(cb)) {
    preph_ = SuperBlock::genesis().digest;
    prepv_ = 0;
    known_sbs_.emplace(preph_, SuperBlock::genesis());
}

void GlobalEngine::start(ReplicaContext& ctx) {
    view_timer_gen_ = ctx.set_timer(TimerKind::GlobalView, params_->delta_global);
    ctx.trace(TraceEv::ViewG, Layer::Global, view_, 0, Digest{});
    if (is_rep(view_))
        conduct(Purpose::NewViewSend, view_, GlobalPhase::NewView, std::nullopt, preph_,
                prepv_, std::nullopt, std::nullopt, std::nullopt, ctx);
}

// ---------------------------------------------------------------------------
// view management
// ---------------------------------------------------------------------------

void GlobalEngine::enter_view(ViewId v, Enter reason, ReplicaContext& ctx) {
    if (v <= view_) return;
    view_ = v;
    executed_this_view_ = false;
    if (reason == Enter::Executed) fail_streak_ = 0;
    if (reason == Enter::Timeout)
        fail_streak_ = std::min(fail_streak_ + 1, params_->backoff_cap);
    uint64_t timeout = params_->delta_global
                       << std::min(fail_streak_, params_->backoff_cap);
    view_timer_gen_ = ctx.set_timer(TimerKind::GlobalView, timeout);
    ctx.trace(TraceEv::ViewG, Layer::Global, view_, static_cast<uint64_t>(reason),
              Digest{});

    // Reset per-view leader state and prune stale collections.
    if (leader_.view != view_) leader_ = LeaderState{};
    leader_.view = view_;
    for (auto it = rounds_.begin(); it != rounds_.end();)
        it = it->second.view < view_ ? rounds_.erase(it) : ++it;
    nv_buffer_.erase(nv_buffer_.begin(), nv_buffer_.upper_bound(view_ >= 2 ? view_ - 2 : 0));

    // Synced entries skip the new-view round: quorums for this view already
    // exist elsewhere, and late confirmations would only burn the slot.
    if (reason != Enter::Synced && is_rep(view_))
        conduct(Purpose::NewViewSend, view_, GlobalPhase::NewView, std::nullopt, preph_,
                prepv_, std::nullopt, std::nullopt, std::nullopt, ctx);
    if (is_global_leader(view_)) try_extlist(ctx);
}

void GlobalEngine::on_timer(TimerKind kind, uint64_t gen, ReplicaContext& ctx) {
    if (kind == TimerKind::GlobalView) {
        if (gen != view_timer_gen_) return;
        if (executed_this_view_) return;
        ctx.trace(TraceEv::Timeout, Layer::Global, view_, fail_streak_ + 1, Digest{});
        enter_view(view_ + 1, Enter::Timeout, ctx);
    } else if (kind == TimerKind::FetchRetry) {
        if (gen != fetch_timer_gen_) return;
        fetch_timer_armed_ = false;
        // Re-issue everything still outstanding with rotated targets.
        for (auto& [d, attempt] : sb_fetches_) {
            attempt++;
            ClusterId c = static_cast<ClusterId>(attempt % topo_->clusters());
            for (const auto& r : dissemination_targets(*topo_, c, attempt)) {
                if (r == me_) continue;
                ctx.send(Address::of(r), Layer::Dissem, SbFetchReq{d});
            }
        }
        for (auto& [d, target] : block_fetches_) {
            auto& [cluster, attempt] = target;
            attempt++;
            // Origin first, then rotate over clusters with storage evidence.
            ClusterId c = cluster;
            if (attempt > 1) c = static_cast<ClusterId>((cluster + attempt) % topo_->clusters());
            for (const auto& r : dissemination_targets(*topo_, c, attempt)) {
                if (r == me_) continue;
                ctx.send(Address::of(r), Layer::Dissem, BlockFetchReq{d});
            }
        }
        if (!sb_fetches_.empty() || !block_fetches_.empty()) arm_fetch_timer(ctx);
    }
}

// ---------------------------------------------------------------------------
// sign rounds (cluster confirmation plumbing)
// ---------------------------------------------------------------------------

void GlobalEngine::conduct(Purpose purpose, ViewId view, GlobalPhase phase,
                           std::optional<Digest> h, std::optional<Digest> h_prime,
                           ViewId v_prime, std::optional<SuperBlock> sb,
                           std::optional<Extension> ext,
                           std::optional<GlobalCertificate> prep_cert,
                           ReplicaContext& ctx) {
    SignRequest req;
    req.view = view;
    req.phase = phase;
    req.h = h;
    req.h_prime = h_prime;
    req.v_prime = v_prime;
    req.sb = std::move(sb);
    req.ext = std::move(ext);
    req.prep_cert = std::move(prep_cert);
    req.round = next_round_++;

    SignRound round;
    round.id = req.round;
    round.purpose = purpose;
    round.view = view;
    round.phase = phase;
    round.h = h;
    round.h_prime = h_prime;
    round.v_prime = v_prime;
    round.payload = confirmation_payload(h, view, h_prime, v_prime, phase);
    ctx.trace(TraceEv::SignReq, Layer::Global, view, static_cast<uint64_t>(phase),
              h ? *h : Digest{});

    // Conduct against myself first; if my own state refuses there is no point
    // in bothering the cluster.
    auto own = co_sign(req, me_, ctx);
    if (!own) return;
    round.parts.emplace(me_.index, *own);
    rounds_.emplace(round.id, round);
    for (uint32_t k = 0; k < topo_->size(me_.cluster); ++k) {
        if (k == me_.index) continue;
        ctx.send(Address::of(ReplicaId{me_.cluster, k}), Layer::Global, req);
    }
    // Degenerate single-replica cluster: quorum is already met.
    auto it = rounds_.find(round.id);
    if (it != rounds_.end() && it->second.parts.size() >= topo_->confirm_quorum(me_.cluster)) {
        std::vector<PartialSignature> parts;
        for (const auto& [idx, p] : it->second.parts) parts.push_back(p);
        auto sig = registry_->combine(parts, me_.cluster, topo_->local_quorum(me_.cluster));
        if (sig) {
            it->second.done = true;
            round_complete(it->second, sig.value(), ctx);
        }
    }
}

std::optional<PartialSignature> GlobalEngine::co_sign(const SignRequest& m,
                                                      ReplicaId from,
                                                      ReplicaContext& ctx) {
    // Only the representative for the slot's view may conduct its rounds.
    if (from != roles::representative(*topo_, me_.cluster, m.view)) return std::nullopt;
    SlotPos slot{m.view, m.phase};
    if (slot < cursor_) return std::nullopt;  // already consumed

    switch (m.phase) {
        case GlobalPhase::NewView: {
            if (m.view > view_ + 1) return std::nullopt;
            if (m.h.has_value()) return std::nullopt;
            if (!m.h_prime || *m.h_prime != preph_ || m.v_prime != prepv_)
                return std::nullopt;
            break;
        }
        case GlobalPhase::Prepare: {
            if (!m.h || !m.sb || !m.ext) return std::nullopt;
            const Extension& ext = *m.ext;
            const SuperBlock& sb = *m.sb;
            if (ext.v != m.view || sb.view != m.view) return std::nullopt;
            ClusterId leader_cluster = roles::global_leader_cluster(*topo_, m.view);
            if (!verify_extension(ext, leader_cluster, *registry_)) return std::nullopt;
            if (SuperBlock::compute_digest(sb) != sb.digest || sb.digest != *m.h)
                return std::nullopt;
            if (!ext.h_prime || sb.prev != *ext.h_prime) return std::nullopt;
            if (m.h_prime != ext.h_prime || m.v_prime != ext.v_prime) return std::nullopt;
            // Proposal must extend the chain this replica can see: head, or a
            // prepared suffix whose content we hold.
            std::vector<Digest> missing;
            auto suffix = suffix_to(*ext.h_prime, &missing);
            if (!suffix) {
                for (const auto& d : missing) request_superblock(d, ctx);
                return std::nullopt;
            }
            std::set<Digest> extra;
            uint64_t h = chain_->height();
            for (const auto& anc : *suffix) {
                for (const auto& id : anc.block_ids) extra.insert(id.digest);
                h = anc.height;
            }
            if (sb.height != h + 1) return std::nullopt;
            auto v = chain_->validate_superblock_at(sb, *blocks_, *ext.h_prime, h + 1,
                                                    extra,
                                                    /*require_ack_durability=*/false);
            if (!v) {
                ctx.trace(TraceEv::Drop, Layer::Global, m.view, 0, sb.digest,
                          "reason=prep_check:" + v.reason);
                return std::nullopt;
            }
            known_sbs_.emplace(sb.digest, sb);
            // View sync: a verifying extension proves F+1 clusters entered m.view.
            if (m.view > view_) enter_view(m.view, Enter::Synced, ctx);
            break;
        }
        case GlobalPhase::Precommit: {
            if (!m.h || !m.prep_cert) return std::nullopt;
            if (m.h_prime.has_value()) return std::nullopt;
            if (!verify_certificate(*m.prep_cert, *m.h, m.view, GlobalPhase::Prepare,
                                    *registry_))
                return std::nullopt;
            if (m.sb) {
                if (SuperBlock::compute_digest(*m.sb) == *m.h)
                    known_sbs_.emplace(m.h.value(), *m.sb);
            }
            // Accumulator update: the only place (preph, prepv) may move.
            if (m.view > prepv_) {
                preph_ = *m.h;
                prepv_ = m.view;
                ctx.trace(TraceEv::Accum, Layer::Global, m.view, 0, preph_);
            }
            if (m.view > view_) enter_view(m.view, Enter::Synced, ctx);
            break;
        }
    }

    cursor_ = slot.next();
    // Entering a view through its new-view round keeps cluster timers in step.
    if (m.phase == GlobalPhase::NewView && m.view == view_ + 1)
        enter_view(m.view, Enter::Synced, ctx);
    return registry_->sign(me_, confirmation_payload(m.h, m.view, m.h_prime, m.v_prime,
                                                     m.phase));
}

void GlobalEngine::handle_sign_request(const SignRequest& m, ReplicaId from,
                                       ReplicaContext& ctx) {
    auto part = co_sign(m, from, ctx);
    if (!part) return;
    ctx.send(Address::of(from), Layer::Global, SignReply{m.round, *part});
}

void GlobalEngine::handle_sign_reply(const SignReply& m, ReplicaId from,
                                     ReplicaContext& ctx) {
    auto it = rounds_.find(m.round);
    if (it == rounds_.end() || it->second.done) return;
    SignRound& round = it->second;
    if (m.part.signer != from) return;
    if (!registry_->verify_partial(m.part, round.payload)) return;
    round.parts.emplace(from.index, m.part);
    if (round.parts.size() < topo_->confirm_quorum(me_.cluster)) return;
    std::vector<PartialSignature> parts;
    for (const auto& [idx, p] : round.parts) parts.push_back(p);
    auto sig = registry_->combine(parts, me_.cluster, topo_->local_quorum(me_.cluster));
    if (!sig) return;
    round.done = true;
    round_complete(round, sig.value(), ctx);
}

void GlobalEngine::round_complete(SignRound& round, const ClusterSignature& sig,
                                  ReplicaContext& ctx) {
    ClusterConfirmation conf;
    conf.h = round.h;
    conf.v = round.view;
    conf.h_prime = round.h_prime;
    conf.v_prime = round.v_prime;
    conf.ph = round.phase;
    conf.clid = me_.cluster;
    conf.sig = sig;
    ctx.trace(TraceEv::Confirm, Layer::Global, round.view,
              static_cast<uint64_t>(round.phase), round.h ? *round.h : Digest{},
              conf_detail(conf));

    switch (round.purpose) {
        case Purpose::NewViewSend: {
            ReplicaId leader = roles::global_leader(*topo_, round.view);
            if (leader == me_) {
                handle_new_view(NewViewG{conf}, me_, ctx);
            } else {
                ctx.send(Address::of(leader), Layer::Global, NewViewG{conf}, 1);
            }
            break;
        }
        case Purpose::LeaderPrep: {
            leader_.preps.push_back(conf);
            if (leader_.proposal && leader_.ext && !leader_.prepare_sent) {
                leader_.prepare_sent = true;
                PrepareG msg{*leader_.proposal, *leader_.ext, conf};
                for (ClusterId c = 0; c < topo_->clusters(); ++c) {
                    if (c == me_.cluster) continue;
                    for (const auto& r : global_targets(*topo_, c, round.view))
                        ctx.send(Address::of(r), Layer::Global, msg, 2);
                }
            }
            try_precommit(ctx);
            break;
        }
        case Purpose::RepPrep: {
            ReplicaId leader = roles::global_leader(*topo_, round.view);
            ctx.send(Address::of(leader), Layer::Global, PrepConfirmG{conf}, 3);
            break;
        }
        case Purpose::LeaderPcom: {
            leader_.pcoms.push_back(conf);
            try_decide(ctx);
            break;
        }
        case Purpose::RepPcom: {
            ReplicaId leader = roles::global_leader(*topo_, round.view);
            ctx.send(Address::of(leader), Layer::Global, PcomConfirmG{conf}, 5);
            break;
        }
    }
}

// ---------------------------------------------------------------------------
// leader phases
// ---------------------------------------------------------------------------

void GlobalEngine::handle_new_view(const NewViewG& m, ReplicaId from,
                                   ReplicaContext& ctx) {
    (void)from;  // the confirmation authenticates itself
    const ClusterConfirmation& conf = m.conf;
    if (conf.ph != GlobalPhase::NewView || conf.h.has_value()) return;
    if (!is_global_leader(conf.v)) return;
    if (conf.v + 2 < view_) return;
    if (conf.sig.cluster != conf.clid ||
        !registry_->verify_cluster(conf.sig, conf.signed_payload()))
        return;
    auto& bucket = nv_buffer_[conf.v];
    auto it = bucket.find(conf.clid);
    if (it == bucket.end()) bucket.emplace(conf.clid, conf);
    if (conf.v == view_) try_extlist(ctx);
}

void GlobalEngine::try_extlist(ReplicaContext& ctx) {
    if (!is_global_leader(view_) || leader_.ext_started || executed_this_view_) return;
    auto it = nv_buffer_.find(view_);
    if (it == nv_buffer_.end()) return;
    std::vector<ClusterConfirmation> confs;
    for (const auto& [clid, c] : it->second) confs.push_back(c);
    if (!c_match(confs, topo_->global_quorum(), std::nullopt, view_,
                 GlobalPhase::NewView, *registry_))
        return;
    auto plan = plan_extension(confs, view_, topo_->global_quorum(), *registry_);
    if (!plan) return;
    leader_.ext_started = true;
    leader_.iterates = plan.value().iterates;
    leader_.iterate_pos = 0;

    std::string inputs;
    for (const auto& c : confs) {
        if (!inputs.empty()) inputs += ",";
        inputs += std::to_string(c.clid) + ":" + std::to_string(c.v_prime);
    }
    ctx.trace(TraceEv::ExtList, Layer::Global, view_, plan.value().seed.v_prime,
              plan.value().seed.h_prime ? *plan.value().seed.h_prime : Digest{},
              "inputs=" + inputs);
    start_ext_round(ExtOp::Start, &plan.value().seed, ctx);
}

void GlobalEngine::start_ext_round(ExtOp op, const ClusterConfirmation* phi,
                                   ReplicaContext& ctx) {
    ExtSignRequest req;
    req.op = op;
    req.view = view_;
    req.round = next_round_++;
    if (phi) req.phi = *phi;
    if (op != ExtOp::Start) req.draft = leader_.draft;

    ExtRound round;
    round.id = req.round;
    round.op = op;
    if (op == ExtOp::Start) {
        round.v = phi->v;
        round.v_prime = phi->v_prime;
        round.h_prime = phi->h_prime;
        round.contributors = {phi->clid};
        round.payload = extension_draft_payload(round.v, round.v_prime, round.h_prime,
                                                round.contributors);
    } else if (op == ExtOp::Iterate) {
        const ExtensionDraft& d = *leader_.draft;
        round.v = d.v;
        round.v_prime = d.v_prime;
        round.h_prime = d.h_prime;
        round.contributors = d.contributors;
        round.contributors.push_back(phi->clid);
        round.payload = extension_draft_payload(round.v, round.v_prime, round.h_prime,
                                                round.contributors);
    } else {
        const ExtensionDraft& d = *leader_.draft;
        round.v = d.v;
        round.v_prime = d.v_prime;
        round.h_prime = d.h_prime;
        round.final_count = static_cast<uint32_t>(d.contributors.size());
        round.payload =
            extension_final_payload(round.v, round.v_prime, round.h_prime,
                                    round.final_count);
    }

    auto own = co_sign_ext(req, me_);
    if (!own) return;
    round.parts.emplace(me_.index, *own);
    leader_.ext_round = round;
    for (uint32_t k = 0; k < topo_->size(me_.cluster); ++k) {
        if (k == me_.index) continue;
        ctx.send(Address::of(ReplicaId{me_.cluster, k}), Layer::Global, req);
    }
    if (leader_.ext_round &&
        leader_.ext_round->parts.size() >= topo_->confirm_quorum(me_.cluster)) {
        std::vector<PartialSignature> parts;
        for (const auto& [idx, p] : leader_.ext_round->parts) parts.push_back(p);
        auto sig =
            registry_->combine(parts, me_.cluster, topo_->local_quorum(me_.cluster));
        if (sig) {
            ExtRound done = *leader_.ext_round;
            leader_.ext_round.reset();
            ext_round_complete(done, sig.value(), ctx);
        }
    }
}

std::optional<PartialSignature> GlobalEngine::co_sign_ext(const ExtSignRequest& m,
                                                          ReplicaId from) {
    // Extension steps are leader-cluster business for the view's leader.
    if (roles::global_leader_cluster(*topo_, m.view) != me_.cluster) return std::nullopt;
    if (from != roles::representative(*topo_, me_.cluster, m.view)) return std::nullopt;
    if (m.view < view_ || m.view > view_ + 1) return std::nullopt;

    Digest payload;
    switch (m.op) {
        case ExtOp::Start: {
            if (!m.phi) return std::nullopt;
            const ClusterConfirmation& phi = *m.phi;
            if (phi.ph != GlobalPhase::NewView || phi.h.has_value()) return std::nullopt;
            if (phi.v != m.view) return std::nullopt;
            if (phi.sig.cluster != phi.clid ||
                !registry_->verify_cluster(phi.sig, phi.signed_payload()))
                return std::nullopt;
            payload = extension_draft_payload(phi.v, phi.v_prime, phi.h_prime,
                                              {phi.clid});
            break;
        }
        case ExtOp::Iterate: {
            if (!m.phi || !m.draft) return std::nullopt;
            const ClusterConfirmation& phi = *m.phi;
            const ExtensionDraft& d = *m.draft;
            if (!verify_extension_draft(d, me_.cluster, *registry_)) return std::nullopt;
            if (phi.ph != GlobalPhase::NewView || phi.h.has_value()) return std::nullopt;
            if (phi.sig.cluster != phi.clid ||
                !registry_->verify_cluster(phi.sig, phi.signed_payload()))
                return std::nullopt;
            if (d.v != phi.v || d.v_prime < phi.v_prime) return std::nullopt;
            if (std::find(d.contributors.begin(), d.contributors.end(), phi.clid) !=
                d.contributors.end())
                return std::nullopt;
            auto contributors = d.contributors;
            contributors.push_back(phi.clid);
            payload = extension_draft_payload(d.v, d.v_prime, d.h_prime, contributors);
            break;
        }
        case ExtOp::Finalize: {
            if (!m.draft) return std::nullopt;
            const ExtensionDraft& d = *m.draft;
            if (!verify_extension_draft(d, me_.cluster, *registry_)) return std::nullopt;
            if (d.contributors.size() < topo_->global_quorum()) return std::nullopt;
            payload = extension_final_payload(
                d.v, d.v_prime, d.h_prime, static_cast<uint32_t>(d.contributors.size()));
            break;
        }
    }
    return registry_->sign(me_, payload);
}

void GlobalEngine::handle_ext_sign_request(const ExtSignRequest& m, ReplicaId from,
                                           ReplicaContext& ctx) {
    auto part = co_sign_ext(m, from);
    if (!part) return;
    ctx.send(Address::of(from), Layer::Global, ExtSignReply{m.round, *part});
}

void GlobalEngine::handle_ext_sign_reply(const ExtSignReply& m, ReplicaId from,
                                         ReplicaContext& ctx) {
    if (!leader_.ext_round || leader_.ext_round->id != m.round) return;
    ExtRound& round = *leader_.ext_round;
    if (m.part.signer != from) return;
    if (!registry_->verify_partial(m.part, round.payload)) return;
    round.parts.emplace(from.index, m.part);
    if (round.parts.size() < topo_->confirm_quorum(me_.cluster)) return;
    std::vector<PartialSignature> parts;
    for (const auto& [idx, p] : round.parts) parts.push_back(p);
    auto sig = registry_->combine(parts, me_.cluster, topo_->local_quorum(me_.cluster));
    if (!sig) return;
    ExtRound done = round;
    leader_.ext_round.reset();
    ext_round_complete(done, sig.value(), ctx);
}

void GlobalEngine::ext_round_complete(ExtRound& round, const ClusterSignature& sig,
                                      ReplicaContext& ctx) {
    if (round.op == ExtOp::Finalize) {
        Extension ext;
        ext.v = round.v;
        ext.v_prime = round.v_prime;
        ext.h_prime = round.h_prime;
        ext.count = round.final_count;
        ext.sig = sig;
        leader_.ext = ext;
        try_propose(ctx);
        return;
    }
    ExtensionDraft draft;
    draft.v = round.v;
    draft.v_prime = round.v_prime;
    draft.h_prime = round.h_prime;
    draft.contributors = round.contributors;
    draft.sig = sig;
    leader_.draft = draft;

    // Fold in the next qualifying confirmation, or finalize.
    while (leader_.iterate_pos < leader_.iterates.size()) {
        const ClusterConfirmation& phi = leader_.iterates[leader_.iterate_pos];
        bool qualifies =
            draft.v == phi.v && draft.v_prime >= phi.v_prime &&
            std::find(draft.contributors.begin(), draft.contributors.end(), phi.clid) ==
                draft.contributors.end();
        if (qualifies) {
            leader_.iterate_pos++;
            start_ext_round(ExtOp::Iterate, &phi, ctx);
            return;
        }
        leader_.iterate_pos++;
    }
    start_ext_round(ExtOp::Finalize, nullptr, ctx);
}

void GlobalEngine::try_propose(ReplicaContext& ctx) {
    if (!leader_.ext || leader_.proposal || executed_this_view_) return;
    const Extension& ext = *leader_.ext;
    if (ext.v != view_) return;

    std::vector<Digest> missing;
    auto suffix = suffix_to(*ext.h_prime, &missing);
    if (!suffix) {
        for (const auto& d : missing) request_superblock(d, ctx);
        return;  // retried when the content arrives
    }
    std::set<Digest> extra;
    uint64_t height = chain_->height();
    for (const auto& anc : *suffix) {
        for (const auto& id : anc.block_ids) extra.insert(id.digest);
        height = anc.height;
    }
    auto ids = chain_->select_blocks(*blocks_, extra);
    SuperBlock sb = SuperBlock::make(*ext.h_prime, height + 1, view_, std::move(ids));
    known_sbs_.emplace(sb.digest, sb);
    leader_.proposal = sb;
    ctx.trace(TraceEv::ProposeG, Layer::Global, view_, sb.height, sb.digest,
              "ids=" + std::to_string(sb.block_ids.size()) + " prev=" + sb.prev.hex());
    conduct(Purpose::LeaderPrep, view_, GlobalPhase::Prepare, sb.digest, ext.h_prime,
            ext.v_prime, sb, ext, std::nullopt, ctx);
}

void GlobalEngine::handle_prepare(const PrepareG& m, ReplicaId from, ReplicaContext& ctx) {
    const Extension& ext = m.ext;
    if (!ext.h_prime) return;
    ClusterId leader_cluster = roles::global_leader_cluster(*topo_, ext.v);
    if (from != roles::representative(*topo_, leader_cluster, ext.v)) return;
    if (!verify_extension(ext, leader_cluster, *registry_)) {
        ctx.trace(TraceEv::Drop, Layer::Global, ext.v, 0, Digest{}, "reason=bad_ext");
        return;
    }
    if (SuperBlock::compute_digest(m.sb) != m.sb.digest) return;
    // SB must extend the extension's superblock.
    if (m.sb.prev != *ext.h_prime || m.sb.view != ext.v) return;
    if (!registry_->verify_cluster(m.leader_prep.sig, m.leader_prep.signed_payload()) ||
        m.leader_prep.clid != leader_cluster || m.leader_prep.ph != GlobalPhase::Prepare ||
        m.leader_prep.h != std::optional<Digest>(m.sb.digest)) {
        ctx.trace(TraceEv::Drop, Layer::Global, ext.v, 0, m.sb.digest,
                  "reason=bad_leader_prep");
        return;
    }
    known_sbs_.emplace(m.sb.digest, m.sb);
    if (ext.v > view_) enter_view(ext.v, Enter::Synced, ctx);
    if (ext.v != view_ || executed_this_view_) return;
    if (!is_rep(view_)) return;  // other recipients hold the proposal only
    conduct(Purpose::RepPrep, view_, GlobalPhase::Prepare, m.sb.digest, ext.h_prime,
            ext.v_prime, m.sb, ext, std::nullopt, ctx);
}

void GlobalEngine::handle_prep_confirm(const PrepConfirmG& m, ReplicaId from,
                                       ReplicaContext& ctx) {
    (void)from;
    if (!is_global_leader(view_) || !leader_.proposal) return;
    const ClusterConfirmation& conf = m.conf;
    if (conf.v != view_ || conf.ph != GlobalPhase::Prepare) return;
    if (conf.h != std::optional<Digest>(leader_.proposal->digest)) return;
    if (conf.sig.cluster != conf.clid ||
        !registry_->verify_cluster(conf.sig, conf.signed_payload()))
        return;
    leader_.preps.push_back(conf);
    try_precommit(ctx);
}

void GlobalEngine::try_precommit(ReplicaContext& ctx) {
    if (!leader_.proposal || leader_.precommit_sent) return;
    Digest h = leader_.proposal->digest;
    if (!c_match(leader_.preps, topo_->global_quorum(), h, view_, GlobalPhase::Prepare,
                 *registry_))
        return;
    auto cert = c_combine(leader_.preps, h, view_, GlobalPhase::Prepare, *registry_);
    if (!cert) return;
    leader_.precommit_sent = true;
    ctx.trace(TraceEv::Certify, Layer::Global, view_,
              static_cast<uint64_t>(GlobalPhase::Prepare), h, cert_detail(cert.value()));
    PrecommitG msg{cert.value()};
    for (ClusterId c = 0; c < topo_->clusters(); ++c) {
        if (c == me_.cluster) continue;
        for (const auto& r : global_targets(*topo_, c, view_))
            ctx.send(Address::of(r), Layer::Global, msg, 4);
    }
    // The leader's own cluster pre-commits through the same gate.
    conduct(Purpose::LeaderPcom, view_, GlobalPhase::Precommit, h, std::nullopt, 0,
            known_sbs_.count(h) ? std::optional<SuperBlock>(known_sbs_.at(h))
                                : std::nullopt,
            std::nullopt, cert.value(), ctx);
}

void GlobalEngine::handle_precommit(const PrecommitG& m, ReplicaId from,
                                    ReplicaContext& ctx) {
    auto stmt = cert_statement(m.cert);
    if (!stmt) return;
    if (!verify_certificate(m.cert, stmt->h, stmt->v, GlobalPhase::Prepare, *registry_)) {
        ctx.trace(TraceEv::Drop, Layer::Global, stmt->v, 0, stmt->h,
                  "reason=bad_prep_cert");
        return;
    }
    if (from != roles::global_leader(*topo_, stmt->v)) return;
    if (stmt->v > view_) enter_view(stmt->v, Enter::Synced, ctx);
    if (stmt->v != view_ || executed_this_view_) return;
    if (!is_rep(view_)) return;
    conduct(Purpose::RepPcom, view_, GlobalPhase::Precommit, stmt->h, std::nullopt, 0,
            known_sbs_.count(stmt->h)
                ? std::optional<SuperBlock>(known_sbs_.at(stmt->h))
                : std::nullopt,
            std::nullopt, m.cert, ctx);
}

void GlobalEngine::handle_pcom_confirm(const PcomConfirmG& m, ReplicaId from,
                                       ReplicaContext& ctx) {
    (void)from;
    if (!is_global_leader(view_) || !leader_.proposal) return;
    const ClusterConfirmation& conf = m.conf;
    if (conf.v != view_ || conf.ph != GlobalPhase::Precommit) return;
    if (conf.h != std::optional<Digest>(leader_.proposal->digest)) return;
    if (conf.sig.cluster != conf.clid ||
        !registry_->verify_cluster(conf.sig, conf.signed_payload()))
        return;
    leader_.pcoms.push_back(conf);
    try_decide(ctx);
}

void GlobalEngine::try_decide(ReplicaContext& ctx) {
    if (!leader_.proposal || leader_.decide_sent) return;
    Digest h = leader_.proposal->digest;
    if (!c_match(leader_.pcoms, topo_->global_quorum(), h, view_, GlobalPhase::Precommit,
                 *registry_))
        return;
    auto cert = c_combine(leader_.pcoms, h, view_, GlobalPhase::Precommit, *registry_);
    if (!cert) return;
    leader_.decide_sent = true;
    ctx.trace(TraceEv::Certify, Layer::Global, view_,
              static_cast<uint64_t>(GlobalPhase::Precommit), h, cert_detail(cert.value()));
    ctx.trace(TraceEv::Decide, Layer::Global, view_, leader_.proposal->height, h);
    DecideG msg{cert.value()};
    for (ClusterId c = 0; c < topo_->clusters(); ++c) {
        if (c == me_.cluster) continue;
        for (const auto& r : global_targets(*topo_, c, view_))
            ctx.send(Address::of(r), Layer::Global, msg, 6);
    }
    handle_decide(msg, me_, ctx);
}

// ---------------------------------------------------------------------------
// decide & execution
// ---------------------------------------------------------------------------

void GlobalEngine::handle_decide(const DecideG& m, ReplicaId from, ReplicaContext& ctx) {
    (void)from;
    auto stmt = cert_statement(m.cert);
    if (!stmt) return;
    if (!verify_certificate(m.cert, stmt->h, stmt->v, GlobalPhase::Precommit,
                            *registry_)) {
        ctx.trace(TraceEv::Drop, Layer::Global, stmt->v, 0, stmt->h,
                  "reason=bad_pcom_cert");
        return;
    }
    if (stmt->v > view_) enter_view(stmt->v, Enter::Synced, ctx);
    // Representatives relay the decision into their cluster once.
    if (is_rep(stmt->v) && !multicast_done_.count(stmt->v)) {
        multicast_done_.insert(stmt->v);
        for (uint32_t k = 0; k < topo_->size(me_.cluster); ++k) {
            if (k == me_.index) continue;
            ctx.send(Address::of(ReplicaId{me_.cluster, k}), Layer::Global, m, 0);
        }
    }
    if (!known_committed(stmt->h)) pending_exec_.emplace(stmt->h, m.cert);
    try_execute(stmt->h, ctx);
}

bool GlobalEngine::known_committed(const Digest& h) const {
    for (const auto& e : chain_->chain())
        if (e.sb.digest == h) return true;
    return false;
}

void GlobalEngine::try_execute(const Digest& h, ReplicaContext& ctx) {
    auto pit = pending_exec_.find(h);
    if (pit == pending_exec_.end()) return;
    if (known_committed(h)) {
        pending_exec_.erase(pit);
        return;
    }
    std::vector<Digest> missing_sbs;
    auto suffix = suffix_to(h, &missing_sbs);
    if (!suffix) {
        for (const auto& d : missing_sbs) request_superblock(d, ctx);
        return;
    }
    // All referenced blocks must be resolvable before executing anything.
    bool blocks_missing = false;
    for (const auto& sb : *suffix) {
        for (const auto& ref : chain_->missing_blocks(sb, *blocks_)) {
            request_block(ref, ctx);
            blocks_missing = true;
        }
    }
    if (blocks_missing) {
        ctx.trace(TraceEv::Drop, Layer::Global, view_, 0, h, "reason=await_fetch");
        return;
    }
    GlobalCertificate cert = pit->second;
    pending_exec_.erase(pit);
    ViewId decided_view = cert.confs.front().v;

    std::vector<ExecutedTx> all;
    for (size_t i = 0; i < suffix->size(); ++i) {
        const SuperBlock& sb = (*suffix)[i];
        auto check = chain_->validate_structural(sb, *blocks_);
        if (!check) {
            ctx.trace(TraceEv::Drop, Layer::Global, sb.view, sb.height, sb.digest,
                      "reason=append:" + check.reason);
            return;
        }
        bool is_tip = (i + 1 == suffix->size());
        auto txs = chain_->append_and_execute(
            sb, is_tip ? std::optional<GlobalCertificate>(cert) : std::nullopt, *blocks_);
        std::string detail = is_tip ? cert_detail(cert) : "via=" + h.hex();
        ctx.trace(TraceEv::Execute, Layer::Global, sb.view, sb.height, sb.digest, detail);
        for (auto& t : txs) all.push_back(t);
    }
    cb_.on_executed(all);

    if (decided_view == view_ && !executed_this_view_) {
        executed_this_view_ = true;
        enter_view(view_ + 1, Enter::Executed, ctx);
    }
    // Other buffered decisions may now link up.
    retry_pending_exec(ctx);
}

void GlobalEngine::retry_pending_exec(ReplicaContext& ctx) {
    std::vector<Digest> keys;
    for (const auto& [d, cert] : pending_exec_) keys.push_back(d);
    for (const auto& d : keys) try_execute(d, ctx);
}

void GlobalEngine::on_block_available(ReplicaContext& ctx) { retry_pending_exec(ctx); }

std::optional<std::vector<SuperBlock>> GlobalEngine::suffix_to(
    const Digest& tip, std::vector<Digest>* missing) const {
    std::vector<SuperBlock> out;
    if (tip == chain_->head().digest) return out;
    Digest cur = tip;
    for (size_t guard = 0; guard < 100000; ++guard) {
        auto it = known_sbs_.find(cur);
        if (it == known_sbs_.end()) {
            if (missing) missing->push_back(cur);
            return std::nullopt;
        }
        out.push_back(it->second);
        if (it->second.prev == chain_->head().digest) {
            std::reverse(out.begin(), out.end());
            return out;
        }
        if (it->second.height <= chain_->height()) {
            // Diverged below our head: stale branch, cannot link.
            return std::nullopt;
        }
        cur = it->second.prev;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// fetch plumbing
// ---------------------------------------------------------------------------

void GlobalEngine::arm_fetch_timer(ReplicaContext& ctx) {
    if (fetch_timer_armed_) return;
    fetch_timer_armed_ = true;
    fetch_timer_gen_ = ctx.set_timer(TimerKind::FetchRetry, params_->fetch_retry);
}

void GlobalEngine::request_superblock(const Digest& d, ReplicaContext& ctx) {
    if (known_sbs_.count(d) || sb_fetches_.count(d)) return;
    sb_fetches_.emplace(d, 0);
    ctx.trace(TraceEv::FetchReq, Layer::Dissem, view_, 1, d);
    // Ask every cluster's rotating f+1; any replica that prepared it responds.
    for (ClusterId c = 0; c < topo_->clusters(); ++c) {
        for (const auto& r : dissemination_targets(*topo_, c, 0)) {
            if (r == me_) continue;
            ctx.send(Address::of(r), Layer::Dissem, SbFetchReq{d});
        }
    }
    arm_fetch_timer(ctx);
}

void GlobalEngine::request_block(const BlockRef& ref, ReplicaContext& ctx) {
    if (blocks_->contains(ref.digest) || block_fetches_.count(ref.digest)) return;
    block_fetches_.emplace(ref.digest, std::make_pair(ref.cluster, 0u));
    ctx.trace(TraceEv::FetchReq, Layer::Dissem, view_, 0, ref.digest);
    for (const auto& r : dissemination_targets(*topo_, ref.cluster, 0)) {
        if (r == me_) continue;
        ctx.send(Address::of(r), Layer::Dissem, BlockFetchReq{ref.digest});
    }
    arm_fetch_timer(ctx);
}

void GlobalEngine::handle_block_fetch_req(const BlockFetchReq& m, ReplicaId from,
                                          ReplicaContext& ctx) {
    const auto* entry = blocks_->find(m.digest);
    if (!entry) return;
    ctx.send(Address::of(from), Layer::Dissem, BlockFetchResp{entry->block, entry->cert});
}

void GlobalEngine::handle_block_fetch_resp(const BlockFetchResp& m, ReplicaId from,
                                           ReplicaContext& ctx) {
    (void)from;
    if (!block_fetches_.count(m.block.digest)) return;
    if (!verify_locked(m.block, m.cert, *registry_)) return;
    block_fetches_.erase(m.block.digest);
    if (blocks_->put(m.block, m.cert, ctx.now())) {
        chain_->credit_origin(m.block.digest, m.block.origin);
        ctx.trace(TraceEv::FetchResp, Layer::Dissem, view_, 0, m.block.digest);
    }
    retry_pending_exec(ctx);
}

void GlobalEngine::handle_sb_fetch_req(const SbFetchReq& m, ReplicaId from,
                                       ReplicaContext& ctx) {
    auto it = known_sbs_.find(m.digest);
    if (it == known_sbs_.end()) return;
    ctx.send(Address::of(from), Layer::Dissem, SbFetchResp{it->second});
}

void GlobalEngine::handle_sb_fetch_resp(const SbFetchResp& m, ReplicaId from,
                                        ReplicaContext& ctx) {
    (void)from;
    if (SuperBlock::compute_digest(m.sb) != m.sb.digest) return;
    if (!sb_fetches_.count(m.sb.digest)) return;
    sb_fetches_.erase(m.sb.digest);
    known_sbs_.emplace(m.sb.digest, m.sb);
    ctx.trace(TraceEv::FetchResp, Layer::Dissem, view_, 1, m.sb.digest);
    retry_pending_exec(ctx);
    if (is_global_leader(view_)) try_propose(ctx);
}

}  // namespace hbft
