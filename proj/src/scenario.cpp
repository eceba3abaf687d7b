#include "hbft/scenario.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace hbft {

using nlohmann::json;

namespace {

LatencyRange range_from(const json& j) {
    if (!j.is_array() || j.size() != 2) throw std::invalid_argument("latency range");
    return LatencyRange{j[0].get<uint64_t>(), j[1].get<uint64_t>()};
}

json range_to(const LatencyRange& r) { return json::array({r.lo, r.hi}); }

const char* fault_kind_name(FaultKind k) {
    switch (k) {
        case FaultKind::CrashReplica: return "crash_replica";
        case FaultKind::CrashCluster: return "crash_cluster";
        case FaultKind::Omit: return "omit";
        case FaultKind::Equivocate: return "equivocate";
        case FaultKind::StaleCert: return "stale_certificate";
        case FaultKind::Delay: return "delay";
    }
    return "?";
}

const char* fault_scope_name(FaultScope s) {
    switch (s) {
        case FaultScope::Always: return "always";
        case FaultScope::LocalLeader: return "local_leader";
        case FaultScope::Representative: return "representative";
        case FaultScope::Disseminator: return "disseminator";
        case FaultScope::GlobalLeader: return "global_leader";
    }
    return "?";
}

const char* omit_name(OmitTarget t) {
    switch (t) {
        case OmitTarget::All: return "all";
        case OmitTarget::Propose: return "propose";
        case OmitTarget::Qc: return "qc";
        case OmitTarget::Prepare: return "prepare";
        case OmitTarget::Precommit: return "precommit";
        case OmitTarget::Decide: return "decide";
        case OmitTarget::NewView: return "newview";
        case OmitTarget::Dissemination: return "dissemination";
        case OmitTarget::Sign: return "sign";
    }
    return "?";
}

}  // namespace

ScenarioConfig ScenarioConfig::from_json_text(const std::string& text) {
    json j = json::parse(text);
    ScenarioConfig cfg;
    cfg.version = j.value("version", 1u);
    if (cfg.version != 1) throw std::invalid_argument("unsupported scenario version");
    cfg.name = j.value("name", std::string("scenario"));
    cfg.seed = j.value("seed", 1ull);
    cfg.max_views = j.value("max_views", 10ull);
    cfg.gst = j.value("gst", 0ull);

    if (j.contains("cluster_sizes")) {
        cfg.cluster_sizes = j["cluster_sizes"].get<std::vector<uint32_t>>();
    } else {
        uint32_t n = j.value("clusters", 3u);
        uint32_t r = j.value("replicas_per_cluster", 4u);
        cfg.cluster_sizes.assign(n, r);
    }

    cfg.params.block_size = j.value("block_size", 400u);
    cfg.params.k_max = j.value("k_max", 2 * static_cast<uint32_t>(cfg.cluster_sizes.size()));
    cfg.params.delta_local = j.value("delta_local", 2000ull);
    cfg.params.delta_global = j.value("delta_global", 15000ull);
    cfg.params.local_view_pace = j.value("local_view_pace", 100ull);
    cfg.params.redisseminate_interval = j.value("redisseminate_interval", 4000ull);
    cfg.params.fetch_retry = j.value("fetch_retry", 2500ull);
    cfg.params.backoff_cap = j.value("backoff_cap", 6u);
    cfg.params.pending_cap = j.value("pending_cap", 4u);

    if (j.contains("intra_latency")) cfg.intra = range_from(j["intra_latency"]);
    if (j.contains("inter_latency")) cfg.inter = range_from(j["inter_latency"]);
    if (j.contains("pregst_extra")) cfg.pregst_extra = range_from(j["pregst_extra"]);

    if (j.contains("clients")) {
        const json& c = j["clients"];
        cfg.clients.count = c.value("count", 0u);
        cfg.clients.interval = c.value("interval", 500ull);
        cfg.clients.tx_limit = c.value("tx_limit", 0ull);
        cfg.clients.payload_size = c.value("payload_size", 16u);
        cfg.clients.timeout = c.value("timeout", 40000ull);
    }

    std::string crypto = j.value("crypto", std::string("simulated"));
    if (crypto == "simulated") cfg.crypto = SigScheme::Simulated;
    else if (crypto == "keyed") cfg.crypto = SigScheme::Keyed;
    else throw std::invalid_argument("crypto must be simulated|keyed");

    cfg.allow_beyond_model = j.value("allow_beyond_model", false);

    if (j.contains("faults")) {
        for (const auto& f : j["faults"]) {
            FaultSpec spec;
            spec.kind = FaultSpec::kind_from(f.at("kind").get<std::string>());
            if (f.contains("scope"))
                spec.scope = FaultSpec::scope_from(f["scope"].get<std::string>());
            if (f.contains("cluster")) spec.cluster = f["cluster"].get<ClusterId>();
            if (f.contains("replica")) spec.replica = f["replica"].get<uint32_t>();
            if (f.contains("target"))
                spec.omit = FaultSpec::omit_from(f["target"].get<std::string>());
            spec.delay = f.value("delay", 0ull);
            spec.at_time = f.value("at", 0ull);
            if (f.contains("from_view")) spec.from_view = f["from_view"].get<ViewId>();
            if (f.contains("to_view")) spec.to_view = f["to_view"].get<ViewId>();
            if (f.contains("from_time")) spec.from_time = f["from_time"].get<uint64_t>();
            if (f.contains("to_time")) spec.to_time = f["to_time"].get<uint64_t>();
            cfg.faults.push_back(spec);
        }
    }

    if (j.contains("key_seed"))
        cfg.key_seed = Digest::from_hex(j["key_seed"].get<std::string>());
    if (j.contains("keys")) {
        for (auto it = j["keys"].begin(); it != j["keys"].end(); ++it) {
            std::string name = it.key();
            auto dot = name.find('.');
            if (dot == std::string::npos) throw std::invalid_argument("key id format");
            ReplicaId r{static_cast<ClusterId>(std::stoul(name.substr(0, dot))),
                        static_cast<uint32_t>(std::stoul(name.substr(dot + 1)))};
            Bytes raw = hex_decode(it.value().get<std::string>());
            if (raw.size() != 32) throw std::invalid_argument("key must be 32 bytes");
            std::array<uint8_t, 32> key{};
            std::copy(raw.begin(), raw.end(), key.begin());
            cfg.explicit_keys.emplace_back(r, key);
        }
    }

    cfg.validate();
    return cfg;
}

ScenarioConfig ScenarioConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string ScenarioConfig::to_json_text() const {
    json j;
    j["version"] = version;
    j["name"] = name;
    j["seed"] = seed;
    j["max_views"] = max_views;
    j["gst"] = gst;
    j["cluster_sizes"] = cluster_sizes;
    j["block_size"] = params.block_size;
    j["k_max"] = params.k_max;
    j["delta_local"] = params.delta_local;
    j["delta_global"] = params.delta_global;
    j["local_view_pace"] = params.local_view_pace;
    j["redisseminate_interval"] = params.redisseminate_interval;
    j["fetch_retry"] = params.fetch_retry;
    j["backoff_cap"] = params.backoff_cap;
    j["pending_cap"] = params.pending_cap;
    j["intra_latency"] = range_to(intra);
    j["inter_latency"] = range_to(inter);
    j["pregst_extra"] = range_to(pregst_extra);
    j["crypto"] = crypto == SigScheme::Keyed ? "keyed" : "simulated";
    j["allow_beyond_model"] = allow_beyond_model;
    if (clients.count) {
        j["clients"] = {{"count", clients.count},
                        {"interval", clients.interval},
                        {"tx_limit", clients.tx_limit},
                        {"payload_size", clients.payload_size},
                        {"timeout", clients.timeout}};
    }
    if (!faults.empty()) {
        json arr = json::array();
        for (const auto& f : faults) {
            json e;
            e["kind"] = fault_kind_name(f.kind);
            e["scope"] = fault_scope_name(f.scope);
            if (f.cluster) e["cluster"] = *f.cluster;
            if (f.replica) e["replica"] = *f.replica;
            e["target"] = omit_name(f.omit);
            if (f.delay) e["delay"] = f.delay;
            if (f.at_time) e["at"] = f.at_time;
            if (f.from_view) e["from_view"] = *f.from_view;
            if (f.to_view) e["to_view"] = *f.to_view;
            if (f.from_time) e["from_time"] = *f.from_time;
            if (f.to_time) e["to_time"] = *f.to_time;
            arr.push_back(e);
        }
        j["faults"] = arr;
    }
    return j.dump();
}

void ScenarioConfig::validate() const {
    Topology topo(cluster_sizes);  // throws on malformed shape
    if (params.k_max == 0) throw std::invalid_argument("k_max must be positive");

    // Adversary budget: crashed clusters <= F; per cluster, statically
    // Byzantine/crashed replicas <= f_i. Role-scoped behaviors bind to at most
    // one replica per cluster at a time and are always admissible.
    uint32_t crashed_clusters = 0;
    std::map<ClusterId, std::set<uint32_t>> static_faulty;
    for (const auto& f : faults) {
        if (f.kind == FaultKind::CrashCluster) {
            if (!f.cluster) throw std::invalid_argument("crash_cluster needs cluster");
            crashed_clusters++;
            continue;
        }
        if (f.scope != FaultScope::Always) continue;
        if (!f.cluster || !f.replica) {
            if (f.kind == FaultKind::CrashReplica)
                throw std::invalid_argument("crash_replica needs cluster+replica");
            continue;  // unscoped behavior: handled as role-wide, admissible
        }
        static_faulty[*f.cluster].insert(*f.replica);
    }
    if (!allow_beyond_model) {
        if (crashed_clusters > topo.F())
            throw std::invalid_argument("fault plan exceeds F crashed clusters");
        for (const auto& [c, replicas] : static_faulty) {
            if (replicas.size() > topo.f(c))
                throw std::invalid_argument("fault plan exceeds f_i in cluster " +
                                            std::to_string(c));
        }
    }
}

KeyRegistry ScenarioConfig::build_registry() const {
    Digest seed_digest;
    if (key_seed) {
        seed_digest = *key_seed;
    } else {
        Encoder e;
        e.u64(seed);
        seed_digest = hash(e.out());
    }
    KeyRegistry reg(topology(), crypto, seed_digest);
    for (const auto& [r, key] : explicit_keys) reg.set_secret(r, key);
    return reg;
}

}  // namespace hbft
