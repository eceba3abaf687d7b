#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>

#include "hbft/bytes.hpp"

namespace hbft {

/// 32-byte content digest. Equality is byte equality.
struct Digest {
    std::array<uint8_t, 32> bytes{};

    auto operator<=>(const Digest&) const = default;

    bool is_zero() const {
        for (auto b : bytes)
            if (b != 0) return false;
        return true;
    }

    std::string hex() const { return hex_encode(bytes.data(), bytes.size()); }
    std::string short_hex() const { return hex().substr(0, 12); }

    static Digest zero() { return Digest{}; }
    static Digest from_hex(std::string_view hex);
};

/// SHA-256 of an arbitrary octet sequence.
Digest hash(const uint8_t* data, size_t len);

inline Digest hash(const Bytes& b) { return hash(b.data(), b.size()); }
inline Digest hash(std::string_view s) {
    return hash(reinterpret_cast<const uint8_t*>(s.data()), s.size());
}

}  // namespace hbft
