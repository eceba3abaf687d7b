#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hbft/crypto.hpp"
#include "hbft/fault.hpp"
#include "hbft/params.hpp"
#include "hbft/topology.hpp"

namespace hbft {

struct ClientPlan {
    uint32_t count = 0;
    uint64_t interval = 500;    // submission spacing per client
    uint64_t tx_limit = 0;      // 0 = unlimited
    uint32_t payload_size = 16;
    uint64_t timeout = 40000;   // retransmission timeout
};

struct LatencyRange {
    uint64_t lo = 0;
    uint64_t hi = 0;
};

/// Whole-run description. Parse/serialize is JSON; see README for the schema.
struct ScenarioConfig {
    uint32_t version = 1;
    std::string name = "scenario";
    uint64_t seed = 1;
    uint64_t max_views = 10;          // run ends when a replica passes this view
    uint64_t gst = 0;
    LatencyRange intra{1, 5};
    LatencyRange inter{500, 1500};
    LatencyRange pregst_extra{0, 5000};
    std::vector<uint32_t> cluster_sizes;
    Params params;
    ClientPlan clients;
    SigScheme crypto = SigScheme::Simulated;
    std::vector<FaultSpec> faults;
    bool allow_beyond_model = false;
    std::optional<Digest> key_seed;   // defaults to H(seed)
    std::vector<std::pair<ReplicaId, std::array<uint8_t, 32>>> explicit_keys;

    Topology topology() const { return Topology(cluster_sizes); }

    static ScenarioConfig from_json_text(const std::string& text);
    static ScenarioConfig from_file(const std::string& path);
    std::string to_json_text() const;

    /// Throws on malformed shapes; returns the offending reason for fault
    /// plans exceeding the declared bounds unless allow_beyond_model is set.
    void validate() const;

    KeyRegistry build_registry() const;
};

}  // namespace hbft
