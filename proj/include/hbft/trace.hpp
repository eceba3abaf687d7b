#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hbft/digest.hpp"
#include "hbft/types.hpp"

namespace hbft {

enum class TraceEv : uint8_t {
    Send = 1,
    Deliver,
    Drop,
    Submit,
    Reply,
    ProposeL,
    VoteL,
    QcL,
    Lock,
    ViewL,
    Disseminate,
    Store,
    Ack,
    Durable,
    SignReq,
    Confirm,
    Certify,
    Accum,
    ExtList,
    ProposeG,
    Decide,
    Execute,
    Timeout,
    ViewG,
    Crash,
    Behavior,
    FetchReq,
    FetchResp,
};

const char* trace_ev_name(TraceEv ev);

enum class Layer : uint8_t { Local = 0, Dissem = 1, Global = 2, Client = 3 };

const char* layer_name(Layer l);

/// One structured event. Total order by (time, seq); append-only.
struct TraceRecord {
    uint64_t time = 0;
    uint64_t seq = 0;
    uint32_t cluster = 0;  // emitting replica; 0xffffffff for harness/clients
    uint32_t index = 0;
    TraceEv ev = TraceEv::Send;
    Layer layer = Layer::Local;
    uint64_t view = 0;
    uint64_t aux = 0;  // event-specific: step label, height, phase, kind...
    Digest d;          // primary digest reference (zero when unused)
    std::string detail;

    static constexpr uint32_t kHarness = 0xffffffff;

    std::string line() const;
};

class TraceLog {
public:
    void append(TraceRecord r) {
        r.seq = static_cast<uint64_t>(records_.size());
        records_.push_back(std::move(r));
    }

    const std::vector<TraceRecord>& records() const { return records_; }
    size_t size() const { return records_.size(); }

    /// Byte-stable serialization: one line per record, stable field names.
    std::string serialize() const;
    /// Digest of the serialized stream, for cheap byte-identity comparison.
    Digest stream_digest() const;

private:
    std::vector<TraceRecord> records_;
};

}  // namespace hbft
