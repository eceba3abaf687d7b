#pragma once

#include <cstdint>

namespace hbft {

/// splitmix64: tiny, deterministic across platforms, good enough for latency
/// sampling and payload generation. Never used inside replica logic.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform in [lo, hi], inclusive. Modulo bias is irrelevant here.
    uint64_t uniform(uint64_t lo, uint64_t hi) {
        if (hi <= lo) return lo;
        return lo + next() % (hi - lo + 1);
    }

private:
    uint64_t state_;
};

}  // namespace hbft
