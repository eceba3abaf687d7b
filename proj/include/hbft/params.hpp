#pragma once

#include <cstdint>

namespace hbft {

/// Protocol timing/sizing knobs, shared by every replica of a run.
/// Times are in simulated microseconds.
struct Params {
    uint32_t block_size = 400;
    uint32_t k_max = 6;  // default 2N, set from topology when loading
    uint64_t delta_local = 2000;
    uint64_t delta_global = 15000;
    uint64_t local_view_pace = 100;       // spacing between local views
    uint64_t redisseminate_interval = 4000;
    uint64_t fetch_retry = 2500;
    uint32_t pending_cap = 4;  // backpressure: heartbeat when this many blocks wait
    uint32_t backoff_cap = 6;  // timeout factor capped at 2^cap
};

enum class TimerKind : uint8_t {
    LocalView = 0,    // local view timeout
    LocalPace = 1,    // start-next-local-view pacing
    GlobalView = 2,   // global view timeout
    Redisseminate = 3,
    FetchRetry = 4,
};

}  // namespace hbft
