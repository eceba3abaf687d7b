#include "hbft/messages.hpp"

namespace hbft {

namespace {
struct KindName {
    const char* operator()(const NewViewL&) const { return "NewViewL"; }
    const char* operator()(const ProposeL&) const { return "ProposeL"; }
    const char* operator()(const VoteL&) const { return "VoteL"; }
    const char* operator()(const QCertL&) const { return "QCertL"; }
    const char* operator()(const BlockMsg&) const { return "BlockMsg"; }
    const char* operator()(const StoreAck&) const { return "StoreAck"; }
    const char* operator()(const BlockFetchReq&) const { return "BlockFetchReq"; }
    const char* operator()(const BlockFetchResp&) const { return "BlockFetchResp"; }
    const char* operator()(const SbFetchReq&) const { return "SbFetchReq"; }
    const char* operator()(const SbFetchResp&) const { return "SbFetchResp"; }
    const char* operator()(const NewViewG&) const { return "NewViewG"; }
    const char* operator()(const PrepareG&) const { return "PrepareG"; }
    const char* operator()(const PrepConfirmG&) const { return "PrepConfirmG"; }
    const char* operator()(const PrecommitG&) const { return "PrecommitG"; }
    const char* operator()(const PcomConfirmG&) const { return "PcomConfirmG"; }
    const char* operator()(const DecideG&) const { return "DecideG"; }
    const char* operator()(const SignRequest&) const { return "SignRequest"; }
    const char* operator()(const SignReply&) const { return "SignReply"; }
    const char* operator()(const ExtSignRequest&) const { return "ExtSignRequest"; }
    const char* operator()(const ExtSignReply&) const { return "ExtSignReply"; }
    const char* operator()(const ClientSubmit&) const { return "ClientSubmit"; }
    const char* operator()(const ClientReplyMsg&) const { return "ClientReply"; }
};
}  // namespace

const char* msg_kind_name(const MsgBody& b) { return std::visit(KindName{}, b); }

uint8_t msg_kind_id(const MsgBody& b) { return static_cast<uint8_t>(b.index()); }

}  // namespace hbft
