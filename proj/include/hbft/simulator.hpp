#pragma once

#include <memory>
#include <queue>
#include <string>
#include <vector>

#include "hbft/replica.hpp"
#include "hbft/rng.hpp"
#include "hbft/scenario.hpp"
#include "hbft/trace.hpp"

namespace hbft {

struct LatencyStats {
    uint64_t count = 0;
    uint64_t avg = 0;
    uint64_t p50 = 0;
    uint64_t p99 = 0;
    uint64_t max = 0;
};

struct Metrics {
    uint64_t duration = 0;
    uint64_t committed_superblocks = 0;
    uint64_t committed_tx = 0;
    double throughput_tx_per_s = 0.0;
    LatencyStats latency;
    uint64_t sends_local = 0;
    uint64_t sends_dissem = 0;
    uint64_t sends_global = 0;
    uint64_t sends_client = 0;
    uint64_t protocol_msgs = 0;  // local + dissem + global
    double per_commit_msgs = 0.0;
    std::vector<uint32_t> steps_per_commit;  // one entry per committed view
    uint64_t views_reached = 0;
    uint64_t first_commit_view = 0;
    uint64_t last_commit_view = 0;
};

/// Everything recomputable from the trace alone.
Metrics compute_metrics(const TraceLog& trace);

struct ReplicaExport {
    ReplicaId id;
    bool crashed = false;
    uint64_t height = 0;
    ViewId global_view = 0;
    std::vector<std::string> chain;
    std::vector<SuperBlock> superblocks;  // committed chain, genesis included
    Digest kv;
};

struct RunOutput {
    ScenarioConfig config;
    TraceLog trace;
    Metrics metrics;
    std::vector<ReplicaExport> exports;
    std::map<Digest, Block> block_data;  // union of replica block stores
};

/// Deterministic discrete-event run: same (seed, config) => same trace bytes.
RunOutput run_scenario(const ScenarioConfig& cfg);

}  // namespace hbft
