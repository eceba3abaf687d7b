#pragma once

#include <string>
#include <vector>

#include "hbft/simulator.hpp"

namespace hbft {

struct SafetyReport {
    bool pass = true;
    std::vector<std::string> violations;

    void fail(std::string v) {
        pass = false;
        if (violations.size() < 50) violations.push_back(std::move(v));
    }
};

/// Trace- and chain-level safety: prefix agreement among non-crashed
/// replicas, single decide per height, single lock per (cluster, local view),
/// at most one applied execution per txid per replica, the
/// cluster-confirmation gate on every global state change, accumulator
/// monotonicity, and leader proposals extending the highest prepared
/// superblock of their new-view set.
SafetyReport check_safety(const RunOutput& out, const KeyRegistry& registry);

struct LivenessReport {
    bool pass = true;
    std::string reason;
    uint64_t commits_post_gst = 0;
    uint64_t unanswered = 0;
};

/// Pass iff superblock heights grow after GST and every transaction submitted
/// up to `duration - bound` received a client reply. The bound is derived
/// from configured timeouts.
LivenessReport check_liveness(const RunOutput& out);
uint64_t liveness_bound(const ScenarioConfig& cfg);

struct LinearFit {
    double slope = 0;
    double intercept = 0;
    double r2 = 0;
};

LinearFit fit_linear(const std::vector<std::pair<double, double>>& pts);

/// Exact quadratic through three points: y = a + b*x + d*x^2.
struct QuadFit {
    double a = 0;
    double b = 0;
    double d = 0;
};

QuadFit fit_quadratic3(const std::vector<std::pair<double, double>>& pts);

struct ComplexityReport {
    std::vector<std::pair<double, double>> points;  // (param, per-commit msgs)
    LinearFit linear;
    QuadFit quad;
    double growth_ratio = 0;  // (y3-y2)/(y2-y1), 1.0 for linear data
};

ComplexityReport complexity_report(const std::vector<std::pair<double, double>>& pts);

}  // namespace hbft
