#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "hbft/types.hpp"

namespace hbft {

/// Static system shape: N = 2F+1 clusters, n_i = 3f_i+1 replicas each.
class Topology {
public:
    Topology() = default;

    explicit Topology(std::vector<uint32_t> cluster_sizes)
        : sizes_(std::move(cluster_sizes)) {
        if (sizes_.empty()) throw std::invalid_argument("no clusters");
        if (sizes_.size() % 2 == 0)
            throw std::invalid_argument("cluster count must be 2F+1 (odd)");
        for (auto n : sizes_) {
            if (n == 0 || n % 3 != 1)
                throw std::invalid_argument("cluster size must be 3f+1");
        }
    }

    static Topology uniform(uint32_t clusters, uint32_t replicas_per_cluster) {
        return Topology(std::vector<uint32_t>(clusters, replicas_per_cluster));
    }

    uint32_t clusters() const { return static_cast<uint32_t>(sizes_.size()); }
    uint32_t F() const { return (clusters() - 1) / 2; }
    uint32_t size(ClusterId c) const { return sizes_.at(c); }
    uint32_t f(ClusterId c) const { return (size(c) - 1) / 3; }

    /// 2f_i+1: local vote quorum and cluster-signature threshold.
    uint32_t local_quorum(ClusterId c) const { return 2 * f(c) + 1; }
    /// n_i - f_i, the co-signing requirement for cluster confirmation
    /// (equals 2f_i+1 for n_i = 3f_i+1).
    uint32_t confirm_quorum(ClusterId c) const { return size(c) - f(c); }
    /// F+1 distinct clusters.
    uint32_t global_quorum() const { return F() + 1; }

    uint32_t total_replicas() const {
        return std::accumulate(sizes_.begin(), sizes_.end(), 0u);
    }

    bool contains(ReplicaId r) const {
        return r.cluster < clusters() && r.index < size(r.cluster);
    }

    const std::vector<uint32_t>& sizes() const { return sizes_; }

private:
    std::vector<uint32_t> sizes_;
};

}  // namespace hbft
