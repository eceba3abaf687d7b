#include "hbft/types.hpp"

namespace hbft {

ClusterSignature decode_cluster_signature(Decoder& d) {
    ClusterSignature sig;
    sig.cluster = d.u32();
    uint32_t n = d.u32();
    if (n > 4096) throw std::out_of_range("absurd signer count");
    sig.parts.reserve(n);
    for (uint32_t i = 0; i < n; ++i) {
        PartialSignature p;
        p.signer.cluster = d.u32();
        p.signer.index = d.u32();
        p.payload.bytes = d.fixed<32>();
        p.tag.bytes = d.fixed<32>();
        sig.parts.push_back(p);
    }
    return sig;
}

ClusterConfirmation decode_confirmation(Decoder& d) {
    ClusterConfirmation c;
    if (d.u8()) {
        Digest h;
        h.bytes = d.fixed<32>();
        c.h = h;
    }
    c.v = d.u64();
    if (d.u8()) {
        Digest h;
        h.bytes = d.fixed<32>();
        c.h_prime = h;
    }
    c.v_prime = d.u64();
    c.ph = static_cast<GlobalPhase>(d.u8());
    c.clid = d.u32();
    c.sig = decode_cluster_signature(d);
    return c;
}

GlobalCertificate decode_certificate(Decoder& d) {
    GlobalCertificate cert;
    uint32_t n = d.u32();
    if (n > 4096) throw std::out_of_range("absurd confirmation count");
    cert.confs.reserve(n);
    for (uint32_t i = 0; i < n; ++i) cert.confs.push_back(decode_confirmation(d));
    return cert;
}

}  // namespace hbft
