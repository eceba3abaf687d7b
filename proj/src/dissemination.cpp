#include "hbft/dissemination.hpp"

namespace hbft {

bool verify_locked(const Block& block, const LockCertificate& cert,
                   const KeyRegistry& registry) {
    if (cert.block != block.digest) return false;
    if (cert.cluster != block.origin) return false;
    if (cert.sig.cluster != block.origin) return false;
    if (Block::compute_digest(block) != block.digest) return false;
    return registry.verify_cluster(cert.sig, cert.signed_payload());
}

std::vector<ReplicaId> dissemination_targets(const Topology& t, ClusterId j, ViewId v) {
    uint32_t n = t.size(j);
    uint32_t count = std::min(t.f(j) + 1, n);
    std::vector<ReplicaId> out;
    out.reserve(count);
    for (uint32_t k = 0; k < count; ++k)
        out.push_back(ReplicaId{j, static_cast<uint32_t>((v + k) % n)});
    return out;
}

std::vector<ReplicaId> global_targets(const Topology& t, ClusterId j, ViewId V) {
    uint32_t n = t.size(j);
    uint32_t count = std::min(t.f(j) + 1, n);
    std::vector<ReplicaId> out;
    out.push_back(roles::representative(t, j, V));
    for (uint32_t k = 0; out.size() < count && k < n; ++k) {
        ReplicaId cand{j, static_cast<uint32_t>((V + k) % n)};
        bool seen = false;
        for (const auto& r : out) seen |= (r == cand);
        if (!seen) out.push_back(cand);
    }
    return out;
}

}  // namespace hbft
