#include "hbft/trace.hpp"

namespace hbft {

const char* trace_ev_name(TraceEv ev) {
    switch (ev) {
        case TraceEv::Send: return "send";
        case TraceEv::Deliver: return "deliver";
        case TraceEv::Drop: return "drop";
        case TraceEv::Submit: return "submit";
        case TraceEv::Reply: return "reply";
        case TraceEv::ProposeL: return "propose_l";
        case TraceEv::VoteL: return "vote_l";
        case TraceEv::QcL: return "qc_l";
        case TraceEv::Lock: return "lock";
        case TraceEv::ViewL: return "view_l";
        case TraceEv::Disseminate: return "disseminate";
        case TraceEv::Store: return "store";
        case TraceEv::Ack: return "ack";
        case TraceEv::Durable: return "durable";
        case TraceEv::SignReq: return "sign_req";
        case TraceEv::Confirm: return "confirm";
        case TraceEv::Certify: return "certify";
        case TraceEv::Accum: return "accum";
        case TraceEv::ExtList: return "extlist";
        case TraceEv::ProposeG: return "propose_g";
        case TraceEv::Decide: return "decide";
        case TraceEv::Execute: return "execute";
        case TraceEv::Timeout: return "timeout";
        case TraceEv::ViewG: return "view_g";
        case TraceEv::Crash: return "crash";
        case TraceEv::Behavior: return "behavior";
        case TraceEv::FetchReq: return "fetch_req";
        case TraceEv::FetchResp: return "fetch_resp";
    }
    return "?";
}

const char* layer_name(Layer l) {
    switch (l) {
        case Layer::Local: return "local";
        case Layer::Dissem: return "dissem";
        case Layer::Global: return "global";
        case Layer::Client: return "client";
    }
    return "?";
}

std::string TraceRecord::line() const {
    std::string s;
    s.reserve(128 + detail.size());
    s += "t=";
    s += std::to_string(time);
    s += " s=";
    s += std::to_string(seq);
    s += " r=";
    if (cluster == kHarness) {
        s += "-";
    } else {
        s += std::to_string(cluster);
        s += ".";
        s += std::to_string(index);
    }
    s += " ev=";
    s += trace_ev_name(ev);
    s += " layer=";
    s += layer_name(layer);
    s += " view=";
    s += std::to_string(view);
    s += " aux=";
    s += std::to_string(aux);
    s += " d=";
    s += d.is_zero() ? "-" : d.hex();
    if (!detail.empty()) {
        s += " ";
        s += detail;
    }
    return s;
}

std::string TraceLog::serialize() const {
    std::string out;
    out.reserve(records_.size() * 96);
    for (const auto& r : records_) {
        out += r.line();
        out += "\n";
    }
    return out;
}

Digest TraceLog::stream_digest() const {
    std::string s = serialize();
    return hash(s);
}

}  // namespace hbft
