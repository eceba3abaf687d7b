#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hbft {

using Bytes = std::vector<uint8_t>;

inline Bytes to_bytes(std::string_view s) {
    return Bytes(s.begin(), s.end());
}

std::string hex_encode(const uint8_t* data, size_t len);

inline std::string hex_encode(const Bytes& b) {
    return hex_encode(b.data(), b.size());
}

Bytes hex_decode(std::string_view hex);

/// Canonical binary encoder. Every hashed or signed payload in the protocol
/// goes through this: fixed-width little-endian integers, u32 length prefixes
/// for variable data, fields in declaration order. See README for the full
/// byte layout.
class Encoder {
public:
    Encoder() = default;

    Encoder& u8(uint8_t v) {
        buf_.push_back(v);
        return *this;
    }

    Encoder& u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
        return *this;
    }

    Encoder& u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
        return *this;
    }

    Encoder& raw(const uint8_t* data, size_t len) {
        buf_.insert(buf_.end(), data, data + len);
        return *this;
    }

    Encoder& bytes(const Bytes& b) {
        u32(static_cast<uint32_t>(b.size()));
        return raw(b.data(), b.size());
    }

    template <size_t N>
    Encoder& fixed(const std::array<uint8_t, N>& a) {
        return raw(a.data(), N);
    }

    const Bytes& out() const { return buf_; }
    Bytes take() { return std::move(buf_); }

private:
    Bytes buf_;
};

/// Companion reader. Throws std::out_of_range on underflow; callers treat
/// that as a verification failure.
class Decoder {
public:
    Decoder(const uint8_t* data, size_t len) : data_(data), len_(len) {}
    explicit Decoder(const Bytes& b) : data_(b.data()), len_(b.size()) {}

    uint8_t u8() {
        need(1);
        return data_[pos_++];
    }

    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(data_[pos_++]) << (8 * i);
        return v;
    }

    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(data_[pos_++]) << (8 * i);
        return v;
    }

    Bytes bytes() {
        uint32_t n = u32();
        need(n);
        Bytes out(data_ + pos_, data_ + pos_ + n);
        pos_ += n;
        return out;
    }

    template <size_t N>
    std::array<uint8_t, N> fixed() {
        need(N);
        std::array<uint8_t, N> out;
        std::memcpy(out.data(), data_ + pos_, N);
        pos_ += N;
        return out;
    }

    size_t remaining() const { return len_ - pos_; }

private:
    void need(size_t n) const {
        if (pos_ + n > len_) throw std::out_of_range("decode underflow");
    }

    const uint8_t* data_;
    size_t len_;
    size_t pos_ = 0;
};

}  // namespace hbft
