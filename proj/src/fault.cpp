#include "hbft/fault.hpp"

#include <algorithm>
#include <stdexcept>

namespace hbft {

FaultKind FaultSpec::kind_from(const std::string& s) {
    if (s == "crash_replica") return FaultKind::CrashReplica;
    if (s == "crash_cluster") return FaultKind::CrashCluster;
    if (s == "omit") return FaultKind::Omit;
    if (s == "equivocate") return FaultKind::Equivocate;
    if (s == "stale_certificate") return FaultKind::StaleCert;
    if (s == "delay") return FaultKind::Delay;
    throw std::invalid_argument("unknown fault kind: " + s);
}

FaultScope FaultSpec::scope_from(const std::string& s) {
    if (s == "always") return FaultScope::Always;
    if (s == "local_leader") return FaultScope::LocalLeader;
    if (s == "representative") return FaultScope::Representative;
    if (s == "disseminator") return FaultScope::Disseminator;
    if (s == "global_leader") return FaultScope::GlobalLeader;
    throw std::invalid_argument("unknown fault scope: " + s);
}

OmitTarget FaultSpec::omit_from(const std::string& s) {
    if (s == "all") return OmitTarget::All;
    if (s == "propose") return OmitTarget::Propose;
    if (s == "qc") return OmitTarget::Qc;
    if (s == "prepare") return OmitTarget::Prepare;
    if (s == "precommit") return OmitTarget::Precommit;
    if (s == "decide") return OmitTarget::Decide;
    if (s == "newview") return OmitTarget::NewView;
    if (s == "dissemination") return OmitTarget::Dissemination;
    if (s == "sign") return OmitTarget::Sign;
    throw std::invalid_argument("unknown omit target: " + s);
}

bool omit_matches(OmitTarget target, const MsgBody& body) {
    switch (target) {
        case OmitTarget::All: return true;
        case OmitTarget::Propose: return std::holds_alternative<ProposeL>(body);
        case OmitTarget::Qc: return std::holds_alternative<QCertL>(body);
        case OmitTarget::Prepare: return std::holds_alternative<PrepareG>(body) ||
                                         std::holds_alternative<PrepConfirmG>(body);
        case OmitTarget::Precommit: return std::holds_alternative<PrecommitG>(body) ||
                                           std::holds_alternative<PcomConfirmG>(body);
        case OmitTarget::Decide: return std::holds_alternative<DecideG>(body);
        case OmitTarget::NewView: return std::holds_alternative<NewViewL>(body) ||
                                         std::holds_alternative<NewViewG>(body);
        case OmitTarget::Dissemination: return std::holds_alternative<BlockMsg>(body) ||
                                               std::holds_alternative<StoreAck>(body);
        case OmitTarget::Sign: return std::holds_alternative<SignRequest>(body) ||
                                      std::holds_alternative<ExtSignRequest>(body);
    }
    return false;
}

namespace {

bool window_active(const FaultSpec& spec, const RoleSnapshot& roles_now, uint64_t now) {
    if (spec.from_view && roles_now.global_view < *spec.from_view) return false;
    if (spec.to_view && roles_now.global_view >= *spec.to_view) return false;
    if (spec.from_time && now < *spec.from_time) return false;
    if (spec.to_time && now >= *spec.to_time) return false;
    return true;
}

bool scope_active(const FaultSpec& spec, const Topology& topo, ReplicaId me,
                  const RoleSnapshot& roles_now) {
    if (spec.cluster && *spec.cluster != me.cluster) return false;
    if (spec.replica && *spec.replica != me.index) return false;
    switch (spec.scope) {
        case FaultScope::Always:
            return true;
        case FaultScope::LocalLeader:
            return roles::local_leader(topo, me.cluster, roles_now.local_view,
                                       roles_now.global_view) == me;
        case FaultScope::Representative:
            return roles::representative(topo, me.cluster, roles_now.global_view) == me;
        case FaultScope::Disseminator:
            return roles::disseminator(topo, me.cluster, roles_now.local_view,
                                       roles_now.global_view) == me;
        case FaultScope::GlobalLeader:
            return roles::global_leader(topo, roles_now.global_view) == me;
    }
    return false;
}

}  // namespace

const FaultSpec* BehaviorBox::active_of(FaultKind kind, const RoleSnapshot& roles_now,
                                        uint64_t now) const {
    for (const auto& s : specs_) {
        if (s.kind != kind) continue;
        if (!window_active(s, roles_now, now)) continue;
        if (!scope_active(s, *topo_, me_, roles_now)) continue;
        return &s;
    }
    return nullptr;
}

std::optional<MsgBody> BehaviorBox::make_variant(const MsgBody& body) {
    if (const auto* p = std::get_if<ProposeL>(&body)) {
        ProposeL v = *p;
        std::vector<Transaction> txs = v.block.txs;
        if (!txs.empty()) {
            txs.pop_back();
        } else {
            txs.push_back(Transaction::make(0xdeadbeefull, v.view, to_bytes("equiv")));
        }
        v.block = Block::make(v.block.origin, v.block.local_view, v.block.parent,
                              std::move(txs));
        return MsgBody{v};
    }
    if (const auto* p = std::get_if<SignRequest>(&body)) {
        if (p->phase == GlobalPhase::Prepare && p->sb && !p->sb->block_ids.empty()) {
            SignRequest v = *p;
            auto ids = v.sb->block_ids;
            ids.pop_back();
            SuperBlock alt =
                SuperBlock::make(v.sb->prev, v.sb->height, v.sb->view, std::move(ids));
            v.sb = alt;
            v.h = alt.digest;
            return MsgBody{v};
        }
        if (p->phase == GlobalPhase::NewView) {
            SignRequest v = *p;
            v.v_prime = v.v_prime + 1;  // claim a higher prepared view
            return MsgBody{v};
        }
        return std::nullopt;
    }
    if (const auto* p = std::get_if<PrepareG>(&body)) {
        if (p->sb.block_ids.empty()) return std::nullopt;
        PrepareG v = *p;
        auto ids = v.sb.block_ids;
        ids.pop_back();
        v.sb = SuperBlock::make(v.sb.prev, v.sb.height, v.sb.view, std::move(ids));
        // leader_prep still covers the original digest; receivers detect it.
        return MsgBody{v};
    }
    if (const auto* p = std::get_if<BlockMsg>(&body)) {
        BlockMsg v = *p;
        std::vector<Transaction> txs = v.block.txs;
        if (txs.empty()) return std::nullopt;
        txs.pop_back();
        v.block = Block::make(v.block.origin, v.block.local_view, v.block.parent,
                              std::move(txs));
        return MsgBody{v};
    }
    return std::nullopt;
}

std::vector<BehaviorBox::OutMsg> BehaviorBox::transform(const std::vector<OutMsg>& batch,
                                                        const RoleSnapshot& roles_now,
                                                        uint64_t now, uint64_t* omitted) {
    std::vector<OutMsg> out;
    if (batch.empty()) return out;

    const FaultSpec* omit_spec = active_of(FaultKind::Omit, roles_now, now);
    const FaultSpec* equiv_spec = active_of(FaultKind::Equivocate, roles_now, now);
    const FaultSpec* stale_spec = active_of(FaultKind::StaleCert, roles_now, now);
    const FaultSpec* delay_spec = active_of(FaultKind::Delay, roles_now, now);

    // Client replies pass through: behaviors target protocol traffic and a
    // lying reply is detectable by the client anyway (no cluster confirmation).
    std::optional<MsgBody> variant;
    bool variant_tried = false;

    for (size_t i = 0; i < batch.size(); ++i) {
        OutMsg m = batch[i];
        if (std::holds_alternative<ClientReplyMsg>(m.body)) {
            out.push_back(std::move(m));
            continue;
        }
        if (omit_spec && omit_matches(omit_spec->omit, m.body)) {
            if (omitted) (*omitted)++;
            continue;
        }
        if (stale_spec) {
            uint8_t kind = msg_kind_id(m.body);
            bool certish = std::holds_alternative<QCertL>(m.body) ||
                           std::holds_alternative<PrecommitG>(m.body) ||
                           std::holds_alternative<DecideG>(m.body) ||
                           std::holds_alternative<PrepareG>(m.body);
            if (certish) {
                auto it = stale_cache_.find(kind);
                MsgBody fresh = m.body;
                if (it != stale_cache_.end()) m.body = it->second;
                stale_cache_[kind] = std::move(fresh);
            }
        }
        if (equiv_spec && i >= batch.size() / 2 && batch.size() > 1) {
            if (!variant_tried) {
                variant = make_variant(batch.front().body);
                variant_tried = true;
            }
            if (variant) {
                m.body = *variant;
            } else {
                // No plausible second version exists for this kind: the
                // second audience is simply left in the dark.
                if (omitted) (*omitted)++;
                continue;
            }
        }
        if (delay_spec) m.extra_delay += delay_spec->delay;
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace hbft
