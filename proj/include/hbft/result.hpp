#pragma once

#include <optional>
#include <string>
#include <utility>

namespace hbft {

enum class Err {
    None = 0,
    InsufficientQuorum,
    MixedPayload,
    ForeignSigner,
    NotLeader,
    NotDisseminator,
    InsufficientNewViews,
    InvalidCert,
    MatchFailed,
    BadExtension,
    BadConfirmation,
    BadCertificate,
    ViewMismatch,
    NullProposal,
    InsufficientContributors,
    LocalQuorumTimeout,
    MissingBlockData,
    ConfigInvalid,
};

inline const char* err_name(Err e) {
    switch (e) {
        case Err::None: return "ok";
        case Err::InsufficientQuorum: return "InsufficientQuorum";
        case Err::MixedPayload: return "MixedPayload";
        case Err::ForeignSigner: return "ForeignSigner";
        case Err::NotLeader: return "NotLeader";
        case Err::NotDisseminator: return "NotDisseminator";
        case Err::InsufficientNewViews: return "InsufficientNewViews";
        case Err::InvalidCert: return "InvalidCert";
        case Err::MatchFailed: return "MatchFailed";
        case Err::BadExtension: return "BadExtension";
        case Err::BadConfirmation: return "BadConfirmation";
        case Err::BadCertificate: return "BadCertificate";
        case Err::ViewMismatch: return "ViewMismatch";
        case Err::NullProposal: return "NullProposal";
        case Err::InsufficientContributors: return "InsufficientContributors";
        case Err::LocalQuorumTimeout: return "LocalQuorumTimeout";
        case Err::MissingBlockData: return "MissingBlockData";
        case Err::ConfigInvalid: return "ConfigInvalid";
    }
    return "?";
}

/// Minimal value-or-error carrier used by protocol operations.
template <typename T>
class Result {
public:
    Result(T value) : value_(std::move(value)), err_(Err::None) {}  // NOLINT
    Result(Err e) : err_(e) {}                                      // NOLINT

    bool ok() const { return err_ == Err::None; }
    explicit operator bool() const { return ok(); }

    Err error() const { return err_; }
    const T& value() const& { return *value_; }
    T& value() & { return *value_; }
    T take() { return std::move(*value_); }

private:
    std::optional<T> value_;
    Err err_;
};

}  // namespace hbft
