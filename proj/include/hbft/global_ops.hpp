#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "hbft/crypto.hpp"
#include "hbft/result.hpp"
#include "hbft/types.hpp"

namespace hbft {

/// True iff `confs` holds at least `count` confirmations from distinct
/// clusters, each verifying and matching (v, ph) — and matching h when h is
/// not null.
bool c_match(const std::vector<ClusterConfirmation>& confs, uint32_t count,
             const std::optional<Digest>& h, ViewId v, GlobalPhase ph,
             const KeyRegistry& registry);

/// Collapse a matching confirmation set into an (F+1)-cluster certificate.
/// With more inputs than needed, the F+1 lowest cluster ids are retained
/// (per-cluster ties broken by encoded bytes) so the result is deterministic
/// regardless of input order.
Result<GlobalCertificate> c_combine(std::vector<ClusterConfirmation> confs,
                                    const std::optional<Digest>& h, ViewId v,
                                    GlobalPhase ph, const KeyRegistry& registry);

/// Verify an (F+1)-certificate against an expected statement.
bool verify_certificate(const GlobalCertificate& cert, const std::optional<Digest>& h,
                        ViewId v, GlobalPhase ph, const KeyRegistry& registry);

/// Verify a finalized extension: leader-cluster signature over
/// (v, v', h', count) with count >= F+1.
bool verify_extension(const Extension& ext, ClusterId leader_cluster,
                      const KeyRegistry& registry);

bool verify_extension_draft(const ExtensionDraft& draft, ClusterId leader_cluster,
                            const KeyRegistry& registry);

/// The deterministic order of extension building for a new-view confirmation
/// set: which confirmation seeds the draft, which are folded in afterwards.
/// Selection rule: highest carried v'; ties broken by lowest cluster id.
/// Non-qualifying confirmations (wrong view/phase, duplicate cluster, bad
/// signature) are skipped.
struct ExtensionPlan {
    ClusterConfirmation seed;
    std::vector<ClusterConfirmation> iterates;
};

Result<ExtensionPlan> plan_extension(const std::vector<ClusterConfirmation>& confs,
                                     ViewId view, uint32_t global_quorum,
                                     const KeyRegistry& registry);

/// Synchronous cluster-signing callback: produces a 2f+1 cluster signature
/// over a payload, or an error when the cluster cannot confirm. The async
/// protocol path drives the same steps through sign rounds; unit tests and
/// oracles use a loopback signer.
using ClusterSigner = std::function<Result<ClusterSignature>(const Digest& payload)>;

Result<ExtensionDraft> cluster_start(const ClusterConfirmation& phi, ViewId view,
                                     const KeyRegistry& registry,
                                     const ClusterSigner& signer);

Result<ExtensionDraft> cluster_iterate(const ExtensionDraft& ext,
                                       const ClusterConfirmation& phi,
                                       ClusterId leader_cluster,
                                       const KeyRegistry& registry,
                                       const ClusterSigner& signer);

Result<Extension> cluster_finalize(const ExtensionDraft& ext, uint32_t global_quorum,
                                   ClusterId leader_cluster, const KeyRegistry& registry,
                                   const ClusterSigner& signer);

/// ExtList: fold of cluster_iterate over the remaining confirmations starting
/// from cluster_start of the highest-v' confirmation, then finalized.
Result<Extension> ext_list(const std::vector<ClusterConfirmation>& confs, ViewId view,
                           uint32_t global_quorum, ClusterId leader_cluster,
                           const KeyRegistry& registry, const ClusterSigner& signer);

}  // namespace hbft
