#include "hbft/crypto.hpp"

#include <algorithm>
#include <set>

namespace hbft {

Digest hmac_sha256(const std::array<uint8_t, 32>& key, const uint8_t* data, size_t len) {
    // Block size of SHA-256 is 64; a 32-byte key is zero-padded.
    std::array<uint8_t, 64> ipad{};
    std::array<uint8_t, 64> opad{};
    for (size_t i = 0; i < 64; ++i) {
        uint8_t k = i < key.size() ? key[i] : 0;
        ipad[i] = k ^ 0x36;
        opad[i] = k ^ 0x5c;
    }
    Bytes inner;
    inner.reserve(64 + len);
    inner.insert(inner.end(), ipad.begin(), ipad.end());
    inner.insert(inner.end(), data, data + len);
    Digest ih = hash(inner);

    Bytes outer;
    outer.reserve(64 + 32);
    outer.insert(outer.end(), opad.begin(), opad.end());
    outer.insert(outer.end(), ih.bytes.begin(), ih.bytes.end());
    return hash(outer);
}

KeyRegistry::KeyRegistry(Topology topo, SigScheme scheme, const Digest& master_seed)
    : topo_(std::move(topo)), scheme_(scheme) {
    secrets_.resize(topo_.clusters());
    for (ClusterId c = 0; c < topo_.clusters(); ++c) {
        secrets_[c].resize(topo_.size(c));
        for (uint32_t k = 0; k < topo_.size(c); ++k) {
            Encoder e;
            e.u8(static_cast<uint8_t>(Tag::KeyDerive));
            e.fixed(master_seed.bytes);
            e.u32(c).u32(k);
            secrets_[c][k] = hash(e.out()).bytes;
        }
    }
}

void KeyRegistry::set_secret(ReplicaId r, const std::array<uint8_t, 32>& key) {
    secrets_.at(r.cluster).at(r.index) = key;
}

const std::array<uint8_t, 32>& KeyRegistry::secret(ReplicaId r) const {
    return secrets_.at(r.cluster).at(r.index);
}

Digest KeyRegistry::tag_for(ReplicaId signer, const Digest& payload) const {
    if (scheme_ == SigScheme::Keyed)
        return hmac_sha256(secret(signer), payload.bytes.data(), payload.bytes.size());
    Encoder e;
    e.u8(static_cast<uint8_t>(Tag::PartialSig)).u32(signer.cluster).u32(signer.index);
    e.fixed(payload.bytes);
    return hash(e.out());
}

PartialSignature KeyRegistry::sign(ReplicaId signer, const Digest& payload) const {
    return PartialSignature{signer, payload, tag_for(signer, payload)};
}

bool KeyRegistry::verify_partial(const PartialSignature& p, const Digest& payload) const {
    if (!topo_.contains(p.signer)) return false;
    if (p.payload != payload) return false;
    return p.tag == tag_for(p.signer, payload);
}

Result<ClusterSignature> KeyRegistry::combine(
    const std::vector<PartialSignature>& partials, ClusterId cluster,
    uint32_t quorum) const {
    std::set<uint32_t> signers;
    std::vector<PartialSignature> kept;
    const Digest* payload = nullptr;
    for (const auto& p : partials) {
        if (p.signer.cluster != cluster) return Err::ForeignSigner;
        if (payload && p.payload != *payload) return Err::MixedPayload;
        payload = &p.payload;
        if (!verify_partial(p, p.payload)) continue;  // drop garbage partials
        if (!signers.insert(p.signer.index).second) continue;  // dedup signer
        kept.push_back(p);
    }
    if (kept.size() < quorum) return Err::InsufficientQuorum;
    std::sort(kept.begin(), kept.end(),
              [](const auto& a, const auto& b) { return a.signer.index < b.signer.index; });
    return ClusterSignature{cluster, std::move(kept)};
}

bool KeyRegistry::verify_cluster(const ClusterSignature& sig, const Digest& payload) const {
    if (sig.cluster >= topo_.clusters()) return false;
    std::set<uint32_t> signers;
    for (const auto& p : sig.parts) {
        if (p.signer.cluster != sig.cluster) return false;
        if (!verify_partial(p, payload)) return false;
        if (!signers.insert(p.signer.index).second) return false;
    }
    return signers.size() >= topo_.local_quorum(sig.cluster);
}

}  // namespace hbft
