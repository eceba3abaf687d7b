#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hbft/messages.hpp"
#include "hbft/roles.hpp"
#include "hbft/topology.hpp"

namespace hbft {

enum class FaultKind : uint8_t {
    CrashReplica,
    CrashCluster,
    Omit,
    Equivocate,
    StaleCert,
    Delay,
};

/// Role scoping: a behavior may bind to whatever replica currently holds a
/// role, instead of one fixed replica.
enum class FaultScope : uint8_t {
    Always,
    LocalLeader,
    Representative,
    Disseminator,
    GlobalLeader,
};

/// Which outgoing messages an omission targets.
enum class OmitTarget : uint8_t {
    All,
    Propose,
    Qc,
    Prepare,
    Precommit,
    Decide,
    NewView,
    Dissemination,
    Sign,
};

struct FaultSpec {
    FaultKind kind = FaultKind::Omit;
    FaultScope scope = FaultScope::Always;
    std::optional<ClusterId> cluster;   // narrow to one cluster (or crash target)
    std::optional<uint32_t> replica;    // fixed-replica behaviors
    OmitTarget omit = OmitTarget::All;
    uint64_t delay = 0;                 // for Delay
    uint64_t at_time = 0;               // crash activation
    std::optional<ViewId> from_view;    // global-view window [from, to)
    std::optional<ViewId> to_view;
    std::optional<uint64_t> from_time;  // time window
    std::optional<uint64_t> to_time;

    static FaultKind kind_from(const std::string& s);
    static FaultScope scope_from(const std::string& s);
    static OmitTarget omit_from(const std::string& s);
};

bool omit_matches(OmitTarget target, const MsgBody& body);

/// Snapshot of a replica's role-relevant state at send time.
struct RoleSnapshot {
    ViewId local_view = 0;
    ViewId global_view = 0;
};

/// Byzantine behaviors are outgoing-message transforms around an otherwise
/// correct replica: they omit, duplicate-with-variation, substitute stale
/// certificates, or delay. They never corrupt the replica's own state.
class BehaviorBox {
public:
    struct OutMsg {
        Address to;
        Layer layer;
        MsgBody body;
        uint32_t step = 0;
        uint64_t extra_delay = 0;
    };

    BehaviorBox(const Topology* topo, ReplicaId me, std::vector<FaultSpec> specs)
        : topo_(topo), me_(me), specs_(std::move(specs)) {}

    bool has_behaviors() const { return !specs_.empty(); }

    /// Transform one batch of sends (one original message fan-out).
    std::vector<OutMsg> transform(const std::vector<OutMsg>& batch,
                                  const RoleSnapshot& roles_now, uint64_t now,
                                  uint64_t* omitted);

private:
    std::optional<MsgBody> make_variant(const MsgBody& body);
    const FaultSpec* active_of(FaultKind kind, const RoleSnapshot& roles_now,
                               uint64_t now) const;

    const Topology* topo_;
    ReplicaId me_;
    std::vector<FaultSpec> specs_;
    std::map<uint8_t, MsgBody> stale_cache_;  // kind id -> previously sent body
};

}  // namespace hbft
