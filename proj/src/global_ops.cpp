#include "hbft/global_ops.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace hbft {

namespace {

bool conf_verifies(const ClusterConfirmation& c, const KeyRegistry& registry) {
    if (c.sig.cluster != c.clid) return false;
    return registry.verify_cluster(c.sig, c.signed_payload());
}

bool conf_matches(const ClusterConfirmation& c, const std::optional<Digest>& h, ViewId v,
                  GlobalPhase ph) {
    if (c.v != v || c.ph != ph) return false;
    if (h && c.h != h) return false;
    return true;
}

}  // namespace

bool c_match(const std::vector<ClusterConfirmation>& confs, uint32_t count,
             const std::optional<Digest>& h, ViewId v, GlobalPhase ph,
             const KeyRegistry& registry) {
    std::set<ClusterId> clusters;
    for (const auto& c : confs) {
        if (!conf_matches(c, h, v, ph)) continue;
        if (!conf_verifies(c, registry)) continue;
        clusters.insert(c.clid);
    }
    return clusters.size() >= count;
}

Result<GlobalCertificate> c_combine(std::vector<ClusterConfirmation> confs,
                                    const std::optional<Digest>& h, ViewId v,
                                    GlobalPhase ph, const KeyRegistry& registry) {
    uint32_t need = registry.topology().global_quorum();
    std::map<ClusterId, ClusterConfirmation> by_cluster;
    for (auto& c : confs) {
        if (!conf_matches(c, h, v, ph)) continue;
        if (!conf_verifies(c, registry)) continue;
        auto it = by_cluster.find(c.clid);
        if (it == by_cluster.end()) {
            by_cluster.emplace(c.clid, std::move(c));
        } else if (c.encoded() < it->second.encoded()) {
            it->second = std::move(c);  // deterministic pick per cluster
        }
    }
    if (by_cluster.size() < need) return Err::MatchFailed;
    GlobalCertificate cert;
    for (auto& [clid, c] : by_cluster) {
        if (cert.confs.size() >= need) break;  // lowest cluster ids win
        cert.confs.push_back(std::move(c));
    }
    return cert;
}

bool verify_certificate(const GlobalCertificate& cert, const std::optional<Digest>& h,
                        ViewId v, GlobalPhase ph, const KeyRegistry& registry) {
    std::set<ClusterId> clusters;
    for (const auto& c : cert.confs) {
        if (!conf_matches(c, h, v, ph)) return false;
        if (!conf_verifies(c, registry)) return false;
        if (!clusters.insert(c.clid).second) return false;
    }
    return clusters.size() >= registry.topology().global_quorum();
}

bool verify_extension(const Extension& ext, ClusterId leader_cluster,
                      const KeyRegistry& registry) {
    if (ext.count < registry.topology().global_quorum()) return false;
    if (ext.sig.cluster != leader_cluster) return false;
    return registry.verify_cluster(ext.sig, ext.signed_payload());
}

bool verify_extension_draft(const ExtensionDraft& draft, ClusterId leader_cluster,
                            const KeyRegistry& registry) {
    if (draft.sig.cluster != leader_cluster) return false;
    return registry.verify_cluster(draft.sig, draft.signed_payload());
}

Result<ExtensionPlan> plan_extension(const std::vector<ClusterConfirmation>& confs,
                                     ViewId view, uint32_t global_quorum,
                                     const KeyRegistry& registry) {
    // Keep one valid new-view confirmation per cluster: the highest v'
    // (bytes as the final tie-break, for input-order independence).
    std::map<ClusterId, ClusterConfirmation> valid;
    for (const auto& c : confs) {
        if (!conf_matches(c, std::nullopt, view, GlobalPhase::NewView)) continue;
        if (c.h.has_value()) continue;  // new-view confirmations carry no h
        if (!conf_verifies(c, registry)) continue;
        auto it = valid.find(c.clid);
        if (it == valid.end()) {
            valid.emplace(c.clid, c);
        } else if (c.v_prime > it->second.v_prime ||
                   (c.v_prime == it->second.v_prime &&
                    c.encoded() < it->second.encoded())) {
            it->second = c;
        }
    }
    if (valid.size() < global_quorum) return Err::MatchFailed;

    // Seed: highest v', ties to the lowest cluster id (map order gives that).
    const ClusterConfirmation* seed = nullptr;
    for (const auto& [clid, c] : valid) {
        if (!seed || c.v_prime > seed->v_prime) seed = &c;
    }
    ExtensionPlan plan{*seed, {}};
    for (const auto& [clid, c] : valid) {
        if (clid == seed->clid) continue;
        plan.iterates.push_back(c);
    }
    return plan;
}

Result<ExtensionDraft> cluster_start(const ClusterConfirmation& phi, ViewId view,
                                     const KeyRegistry& registry,
                                     const ClusterSigner& signer) {
    if (phi.ph != GlobalPhase::NewView || phi.h.has_value()) return Err::BadConfirmation;
    if (phi.v != view) return Err::BadConfirmation;
    if (!conf_verifies(phi, registry)) return Err::BadConfirmation;
    ExtensionDraft draft;
    draft.v = phi.v;
    draft.v_prime = phi.v_prime;
    draft.h_prime = phi.h_prime;
    draft.contributors = {phi.clid};
    auto sig = signer(draft.signed_payload());
    if (!sig) return sig.error();
    draft.sig = sig.take();
    return draft;
}

Result<ExtensionDraft> cluster_iterate(const ExtensionDraft& ext,
                                       const ClusterConfirmation& phi,
                                       ClusterId leader_cluster,
                                       const KeyRegistry& registry,
                                       const ClusterSigner& signer) {
    if (phi.ph != GlobalPhase::NewView || phi.h.has_value()) return Err::BadConfirmation;
    if (!verify_extension_draft(ext, leader_cluster, registry)) return Err::BadExtension;
    if (!conf_verifies(phi, registry)) return Err::BadConfirmation;
    // Non-qualifying confirmations leave the draft unchanged.
    if (ext.v != phi.v || ext.v_prime < phi.v_prime) return ext;
    if (std::find(ext.contributors.begin(), ext.contributors.end(), phi.clid) !=
        ext.contributors.end())
        return ext;
    ExtensionDraft next = ext;
    next.contributors.push_back(phi.clid);
    auto sig = signer(next.signed_payload());
    if (!sig) return sig.error();
    next.sig = sig.take();
    return next;
}

Result<Extension> cluster_finalize(const ExtensionDraft& ext, uint32_t global_quorum,
                                   ClusterId leader_cluster, const KeyRegistry& registry,
                                   const ClusterSigner& signer) {
    if (!verify_extension_draft(ext, leader_cluster, registry)) return Err::BadExtension;
    if (ext.contributors.size() < global_quorum) return Err::InsufficientContributors;
    Extension final_ext;
    final_ext.v = ext.v;
    final_ext.v_prime = ext.v_prime;
    final_ext.h_prime = ext.h_prime;
    final_ext.count = static_cast<uint32_t>(ext.contributors.size());
    auto sig = signer(final_ext.signed_payload());
    if (!sig) return sig.error();
    final_ext.sig = sig.take();
    return final_ext;
}

Result<Extension> ext_list(const std::vector<ClusterConfirmation>& confs, ViewId view,
                           uint32_t global_quorum, ClusterId leader_cluster,
                           const KeyRegistry& registry, const ClusterSigner& signer) {
    auto plan = plan_extension(confs, view, global_quorum, registry);
    if (!plan) return plan.error();
    auto draft = cluster_start(plan.value().seed, view, registry, signer);
    if (!draft) return draft.error();
    ExtensionDraft cur = draft.take();
    for (const auto& phi : plan.value().iterates) {
        auto next = cluster_iterate(cur, phi, leader_cluster, registry, signer);
        if (!next) return next.error();
        cur = next.take();
    }
    return cluster_finalize(cur, global_quorum, leader_cluster, registry, signer);
}

}  // namespace hbft
