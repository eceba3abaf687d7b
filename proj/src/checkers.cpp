#include "hbft/checkers.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "hbft/global_ops.hpp"

namespace hbft {

namespace {

std::string find_field(const std::string& detail, const std::string& key) {
    size_t pos = detail.find(key + "=");
    if (pos != 0 && (pos == std::string::npos || detail[pos - 1] != ' '))
        pos = detail.find(" " + key + "=");
    if (pos == std::string::npos) {
        if (detail.rfind(key + "=", 0) != 0) return {};
        pos = 0;
    } else if (detail[pos] == ' ') {
        pos += 1;
    }
    size_t start = pos + key.size() + 1;
    size_t end = detail.find(' ', start);
    return detail.substr(start, end == std::string::npos ? std::string::npos : end - start);
}

struct ConfKey {
    uint32_t cluster;
    uint64_t view;
    uint64_t phase;
    auto operator<=>(const ConfKey&) const = default;
};

}  // namespace

SafetyReport check_safety(const RunOutput& out, const KeyRegistry& registry) {
    SafetyReport rep;
    const auto& records = out.trace.records();

    // 1. Chain prefix agreement among non-crashed replicas.
    const ReplicaExport* longest = nullptr;
    for (const auto& ex : out.exports) {
        if (ex.crashed) continue;
        if (!longest || ex.chain.size() > longest->chain.size()) longest = &ex;
    }
    if (longest) {
        for (const auto& ex : out.exports) {
            if (ex.crashed) continue;
            for (size_t i = 0; i < ex.chain.size(); ++i) {
                if (ex.chain[i] != longest->chain[i]) {
                    rep.fail("chain divergence at height " + std::to_string(i) +
                             " replica " + ex.id.str() + " vs " + longest->id.str());
                    break;
                }
            }
        }
    }

    // 2-4: single decide per height, single lock per (cluster, local view),
    // exactly-once applied reply per (replica, txid).
    std::map<uint64_t, std::set<std::string>> decides_at_height;
    std::map<std::pair<uint32_t, uint64_t>, std::set<std::string>> locks;
    std::set<std::pair<std::string, std::string>> applied_replies;
    std::map<ConfKey, std::set<std::string>> conf_payloads;
    std::map<std::pair<uint64_t, std::string>, bool> valid_prep_cert;  // (view,h)
    std::map<std::pair<uint64_t, std::string>, bool> valid_pcom_cert;
    std::map<uint64_t, std::pair<uint64_t, std::string>> extlist_choice;  // view -> (v', h')
    std::map<std::string, uint64_t> accum_view_by_replica;

    for (const auto& r : records) {
        std::string rid = std::to_string(r.cluster) + "." + std::to_string(r.index);
        switch (r.ev) {
            case TraceEv::Execute: {
                decides_at_height[r.aux].insert(r.d.hex());
                break;
            }
            case TraceEv::Lock: {
                locks[{r.cluster, r.view}].insert(r.d.hex());
                break;
            }
            case TraceEv::Reply: {
                if (find_field(r.detail, "s") == "0") {
                    auto key = std::make_pair(rid, r.d.hex());
                    if (!applied_replies.insert(key).second)
                        rep.fail("double applied reply txid " + r.d.short_hex() +
                                 " at " + rid);
                }
                break;
            }
            case TraceEv::Confirm: {
                std::string hex = find_field(r.detail, "conf");
                if (hex.empty()) {
                    rep.fail("confirm record without payload at " + rid);
                    break;
                }
                try {
                    Bytes raw = hex_decode(hex);
                    Decoder d(raw);
                    ClusterConfirmation conf = decode_confirmation(d);
                    if (conf.sig.cluster != conf.clid ||
                        !registry.verify_cluster(conf.sig, conf.signed_payload())) {
                        rep.fail("invalid cluster confirmation in trace at " + rid);
                        break;
                    }
                    std::string payload = conf.signed_payload().hex();
                    auto& bucket = conf_payloads[ConfKey{
                        conf.clid, conf.v, static_cast<uint64_t>(conf.ph)}];
                    bucket.insert(payload);
                    if (bucket.size() > 1)
                        rep.fail("two confirmations for one slot: cluster " +
                                 std::to_string(conf.clid) + " view " +
                                 std::to_string(conf.v) + " phase " +
                                 std::to_string(static_cast<int>(conf.ph)));
                } catch (const std::exception& e) {
                    rep.fail(std::string("confirm decode failure: ") + e.what());
                }
                break;
            }
            case TraceEv::Certify: {
                std::string hex = find_field(r.detail, "cert");
                if (hex.empty()) {
                    rep.fail("certify record without payload at " + rid);
                    break;
                }
                try {
                    Bytes raw = hex_decode(hex);
                    Decoder d(raw);
                    GlobalCertificate cert = decode_certificate(d);
                    GlobalPhase ph = static_cast<GlobalPhase>(r.aux);
                    if (!verify_certificate(cert, r.d, r.view, ph, registry)) {
                        rep.fail("invalid certificate in trace at " + rid + " view " +
                                 std::to_string(r.view));
                        break;
                    }
                    if (ph == GlobalPhase::Prepare)
                        valid_prep_cert[{r.view, r.d.hex()}] = true;
                    else if (ph == GlobalPhase::Precommit)
                        valid_pcom_cert[{r.view, r.d.hex()}] = true;
                } catch (const std::exception& e) {
                    rep.fail(std::string("certificate decode failure: ") + e.what());
                }
                break;
            }
            case TraceEv::ExtList: {
                // aux = chosen v'; inputs listed as clid:v' pairs.
                std::string inputs = find_field(r.detail, "inputs");
                uint64_t max_vp = 0;
                size_t pos = 0;
                while (pos < inputs.size()) {
                    size_t colon = inputs.find(':', pos);
                    if (colon == std::string::npos) break;
                    size_t comma = inputs.find(',', colon);
                    uint64_t vp = std::stoull(
                        inputs.substr(colon + 1, (comma == std::string::npos
                                                      ? inputs.size()
                                                      : comma) - colon - 1));
                    max_vp = std::max(max_vp, vp);
                    if (comma == std::string::npos) break;
                    pos = comma + 1;
                }
                if (r.aux != max_vp)
                    rep.fail("extension does not select the highest prepared view at view " +
                             std::to_string(r.view));
                extlist_choice[r.view] = {r.aux, r.d.hex()};
                break;
            }
            case TraceEv::ProposeG: {
                std::string prev = find_field(r.detail, "prev");
                auto it = extlist_choice.find(r.view);
                if (it != extlist_choice.end() && !prev.empty() &&
                    prev != it->second.second)
                    rep.fail("proposal at view " + std::to_string(r.view) +
                             " does not extend the selected superblock");
                break;
            }
            case TraceEv::Accum: {
                auto [it, fresh] = accum_view_by_replica.emplace(rid, r.view);
                if (!fresh) {
                    if (r.view <= it->second)
                        rep.fail("accumulator moved backwards at " + rid + " view " +
                                 std::to_string(r.view));
                    it->second = r.view;
                }
                break;
            }
            default:
                break;
        }
    }

    for (const auto& [height, digests] : decides_at_height) {
        if (digests.size() > 1)
            rep.fail("two superblocks executed at height " + std::to_string(height));
    }
    for (const auto& [key, digests] : locks) {
        if (digests.size() > 1)
            rep.fail("two lock certificates for cluster " + std::to_string(key.first) +
                     " local view " + std::to_string(key.second));
    }

    // 5. Gate: accumulator updates and executions must be certificate-backed.
    for (const auto& r : records) {
        if (r.ev == TraceEv::Accum) {
            if (!valid_prep_cert.count({r.view, r.d.hex()}))
                rep.fail("accumulator update without a prepare certificate at view " +
                         std::to_string(r.view));
        } else if (r.ev == TraceEv::Execute) {
            std::string via = find_field(r.detail, "via");
            if (!via.empty()) continue;  // ancestor of a certified execution
            std::string cert = find_field(r.detail, "cert");
            if (cert.empty() || !valid_pcom_cert.count({r.view, r.d.hex()}))
                rep.fail("execution without a pre-commit certificate at height " +
                         std::to_string(r.aux));
        }
    }
    return rep;
}

uint64_t liveness_bound(const ScenarioConfig& cfg) {
    return 2 * cfg.clients.timeout + 24 * cfg.params.delta_global;
}

LivenessReport check_liveness(const RunOutput& out) {
    LivenessReport rep;
    const ScenarioConfig& cfg = out.config;
    uint64_t bound = liveness_bound(cfg);
    uint64_t end = out.metrics.duration;

    if (end < cfg.gst + bound) {
        rep.pass = false;
        rep.reason = "trace does not extend far enough past GST";
        return rep;
    }

    uint64_t max_height_at_gst = 0;
    uint64_t max_height = 0;
    std::map<Digest, uint64_t> first_submit;
    std::set<Digest> answered;
    for (const auto& r : out.trace.records()) {
        if (r.ev == TraceEv::Execute) {
            if (r.time <= cfg.gst) max_height_at_gst = std::max(max_height_at_gst, r.aux);
            max_height = std::max(max_height, r.aux);
        } else if (r.ev == TraceEv::Submit) {
            if (!first_submit.count(r.d)) first_submit[r.d] = r.time;
        } else if (r.ev == TraceEv::Deliver && r.layer == Layer::Client &&
                   r.cluster == TraceRecord::kHarness) {
            answered.insert(r.d);
        }
    }
    rep.commits_post_gst = max_height - max_height_at_gst;
    if (rep.commits_post_gst == 0) {
        rep.pass = false;
        rep.reason = "no superblock growth after GST";
        return rep;
    }
    for (const auto& [txid, t] : first_submit) {
        if (t + bound > end) continue;  // too fresh to judge
        if (!answered.count(txid)) rep.unanswered++;
    }
    if (rep.unanswered) {
        rep.pass = false;
        rep.reason = std::to_string(rep.unanswered) + " transactions unanswered in bound";
    }
    return rep;
}

LinearFit fit_linear(const std::vector<std::pair<double, double>>& pts) {
    LinearFit fit;
    double n = static_cast<double>(pts.size());
    if (n < 2) return fit;
    double sx = 0, sy = 0;
    for (auto [x, y] : pts) {
        sx += x;
        sy += y;
    }
    double mx = sx / n, my = sy / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (auto [x, y] : pts) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    fit.slope = sxx > 0 ? sxy / sxx : 0;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0;
    for (auto [x, y] : pts) {
        double e = y - (fit.intercept + fit.slope * x);
        ss_res += e * e;
    }
    fit.r2 = syy > 0 ? 1.0 - ss_res / syy : 1.0;
    return fit;
}

QuadFit fit_quadratic3(const std::vector<std::pair<double, double>>& pts) {
    QuadFit q;
    if (pts.size() != 3) return q;
    double x1 = pts[0].first, x2 = pts[1].first, x3 = pts[2].first;
    double y1 = pts[0].second, y2 = pts[1].second, y3 = pts[2].second;
    // Divided differences.
    double f12 = (y2 - y1) / (x2 - x1);
    double f23 = (y3 - y2) / (x3 - x2);
    q.d = (f23 - f12) / (x3 - x1);
    q.b = f12 - q.d * (x1 + x2);
    q.a = y1 - q.b * x1 - q.d * x1 * x1;
    return q;
}

ComplexityReport complexity_report(const std::vector<std::pair<double, double>>& pts) {
    ComplexityReport rep;
    rep.points = pts;
    rep.linear = fit_linear(pts);
    if (pts.size() == 3) {
        rep.quad = fit_quadratic3(pts);
        double d1 = pts[1].second - pts[0].second;
        double d2 = pts[2].second - pts[1].second;
        rep.growth_ratio = d1 > 0 ? d2 / d1 : 0;
    }
    return rep;
}

}  // namespace hbft
