#pragma once

#include <optional>
#include <string>
#include <variant>

#include "hbft/trace.hpp"
#include "hbft/types.hpp"

namespace hbft {

/// A message endpoint: protocol replica or external client.
struct Address {
    bool is_client = false;
    ReplicaId replica;
    uint64_t client = 0;

    static Address of(ReplicaId r) { return Address{false, r, 0}; }
    static Address of_client(uint64_t id) { return Address{true, {}, id}; }

    auto operator<=>(const Address&) const = default;

    std::string str() const {
        return is_client ? "c" + std::to_string(client) : replica.str();
    }
};

// --- local consensus ---------------------------------------------------------

struct NewViewL {
    ViewId view = 0;  // view being entered
    ViewId prepared_view = 0;
    Digest prepared;
    std::optional<ClusterSignature> prepare_qc;  // null only for local genesis
};

struct ProposeL {
    ViewId view = 0;
    Block block;
    ViewId justify_view = 0;
    std::optional<ClusterSignature> justify_qc;
};

struct VoteL {
    LocalPhase phase = LocalPhase::Prepare;
    ViewId view = 0;
    Digest block;
    PartialSignature part;
};

struct QCertL {
    LocalPhase phase = LocalPhase::Prepare;
    ViewId view = 0;
    Digest block;
    ClusterSignature qc;
};

// --- dissemination -----------------------------------------------------------

struct BlockMsg {
    Block block;
    LockCertificate cert;
    bool relayed = false;
    ViewId round = 0;  // dissemination round: keys the rotating target set
};

struct StoreAck {
    Digest block;
    ClusterId origin = 0;
};

struct BlockFetchReq {
    Digest digest;
};

struct BlockFetchResp {
    Block block;
    LockCertificate cert;
};

struct SbFetchReq {
    Digest digest;
};

struct SbFetchResp {
    SuperBlock sb;
};

// --- global consensus ---------------------------------------------------------

struct NewViewG {
    ClusterConfirmation conf;
};

struct PrepareG {
    SuperBlock sb;
    Extension ext;
    ClusterConfirmation leader_prep;
};

struct PrepConfirmG {
    ClusterConfirmation conf;
};

struct PrecommitG {
    GlobalCertificate cert;  // F+1 prepare confirmations
};

struct PcomConfirmG {
    ClusterConfirmation conf;
};

struct DecideG {
    GlobalCertificate cert;  // F+1 pre-commit confirmations
};

/// Representative -> local replicas: request one co-signature for the slot
/// (view, phase). Carries whatever evidence the co-signers need to validate
/// the transition.
struct SignRequest {
    ViewId view = 0;
    GlobalPhase phase = GlobalPhase::NewView;
    std::optional<Digest> h;
    std::optional<Digest> h_prime;
    ViewId v_prime = 0;
    std::optional<SuperBlock> sb;               // prepare: full proposal
    std::optional<Extension> ext;               // prepare: extension
    std::optional<GlobalCertificate> prep_cert; // pre-commit: justification
    uint64_t round = 0;
};

struct SignReply {
    uint64_t round = 0;
    PartialSignature part;
};

enum class ExtOp : uint8_t { Start = 0, Iterate = 1, Finalize = 2 };

/// Leader -> own cluster: co-sign one step of extension building.
struct ExtSignRequest {
    ExtOp op = ExtOp::Start;
    ViewId view = 0;
    std::optional<ClusterConfirmation> phi;  // start/iterate input
    std::optional<ExtensionDraft> draft;     // iterate/finalize input
    uint64_t round = 0;
};

struct ExtSignReply {
    uint64_t round = 0;
    PartialSignature part;
};

// --- clients -------------------------------------------------------------------

struct ClientSubmit {
    Transaction tx;
};

struct ClientReplyMsg {
    Digest txid;
    uint64_t height = 0;
    uint8_t status = 0;  // 0 applied, 1 deduplicated
};

using MsgBody =
    std::variant<NewViewL, ProposeL, VoteL, QCertL, BlockMsg, StoreAck, BlockFetchReq,
                 BlockFetchResp, SbFetchReq, SbFetchResp, NewViewG, PrepareG,
                 PrepConfirmG, PrecommitG, PcomConfirmG, DecideG, SignRequest, SignReply,
                 ExtSignRequest, ExtSignReply, ClientSubmit, ClientReplyMsg>;

struct Message {
    Address from;
    Address to;
    Layer layer = Layer::Local;
    uint32_t step = 0;  // global-layer communication step label (1..6), else 0
    MsgBody body;
};

const char* msg_kind_name(const MsgBody& b);
uint8_t msg_kind_id(const MsgBody& b);

}  // namespace hbft
