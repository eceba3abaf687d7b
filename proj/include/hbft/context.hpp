#pragma once

#include "hbft/messages.hpp"
#include "hbft/params.hpp"
#include "hbft/trace.hpp"

namespace hbft {

/// Everything a replica may do to the outside world. The simulation harness
/// implements it; the same state machines could be bound to a real transport.
class ReplicaContext {
public:
    virtual ~ReplicaContext() = default;

    virtual uint64_t now() const = 0;

    virtual void send(const Address& to, Layer layer, MsgBody body, uint32_t step = 0) = 0;

    /// Arms (or re-arms) the timer of the given kind; returns its generation.
    /// A later arm invalidates earlier generations of the same kind.
    virtual uint64_t set_timer(TimerKind kind, uint64_t delay) = 0;

    virtual void trace(TraceEv ev, Layer layer, uint64_t view, uint64_t aux,
                       const Digest& d, std::string detail = {}) = 0;
};

}  // namespace hbft
