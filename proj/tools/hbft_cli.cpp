// Command-line front end: run scenarios, check traces, sweep scaling
// dimensions, and dump the role schedule.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hbft/checkers.hpp"
#include "hbft/roles.hpp"
#include "hbft/simulator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json metrics_json(const hbft::Metrics& m) {
    json j;
    j["duration_us"] = m.duration;
    j["committed_superblocks"] = m.committed_superblocks;
    j["committed_tx"] = m.committed_tx;
    j["throughput_tx_per_s"] = m.throughput_tx_per_s;
    j["latency_us"] = {{"count", m.latency.count},
                       {"avg", m.latency.avg},
                       {"p50", m.latency.p50},
                       {"p99", m.latency.p99},
                       {"max", m.latency.max}};
    j["messages"] = {{"local", m.sends_local},
                     {"dissem", m.sends_dissem},
                     {"global", m.sends_global},
                     {"client", m.sends_client}};
    j["protocol_msgs"] = m.protocol_msgs;
    j["per_commit_msgs"] = m.per_commit_msgs;
    j["steps_per_commit"] = m.steps_per_commit;
    j["views_reached"] = m.views_reached;
    j["first_commit_view"] = m.first_commit_view;
    j["last_commit_view"] = m.last_commit_view;
    return j;
}

int write_run_output(const hbft::RunOutput& out, const std::string& dir) {
    fs::create_directories(dir);
    {
        std::ofstream f(dir + "/trace.txt");
        // First line embeds the scenario so `check` can run standalone.
        f << "# scenario " << out.config.to_json_text() << "\n";
        f << out.trace.serialize();
    }
    {
        std::ofstream f(dir + "/metrics.json");
        f << metrics_json(out.metrics).dump(2) << "\n";
    }
    fs::create_directories(dir + "/chains");
    for (const auto& ex : out.exports) {
        std::ofstream f(dir + "/chains/replica_" + std::to_string(ex.id.cluster) + "_" +
                        std::to_string(ex.id.index) + ".txt");
        f << "# replica " << ex.id.str() << (ex.crashed ? " crashed" : "")
          << " kv=" << ex.kv.hex() << "\n";
        for (const auto& line : ex.chain) f << line << "\n";
    }
    return 0;
}

int cmd_run(const std::string& scenario_path, uint64_t seed_override, bool has_seed,
            uint64_t views_override, bool has_views, const std::string& out_dir) {
    hbft::ScenarioConfig cfg = hbft::ScenarioConfig::from_file(scenario_path);
    if (has_seed) cfg.seed = seed_override;
    if (has_views) cfg.max_views = views_override;
    hbft::RunOutput out = hbft::run_scenario(cfg);
    hbft::KeyRegistry registry = cfg.build_registry();
    auto safety = hbft::check_safety(out, registry);
    auto liveness = hbft::check_liveness(out);

    std::cout << "scenario " << cfg.name << " seed " << cfg.seed << "\n";
    std::cout << "  committed " << out.metrics.committed_superblocks << " superblocks, "
              << out.metrics.committed_tx << " tx in " << out.metrics.duration
              << " us\n";
    std::cout << "  messages local=" << out.metrics.sends_local
              << " dissem=" << out.metrics.sends_dissem
              << " global=" << out.metrics.sends_global << "\n";
    std::cout << "  safety " << (safety.pass ? "PASS" : "FAIL") << "\n";
    for (const auto& v : safety.violations) std::cout << "    " << v << "\n";
    std::cout << "  liveness " << (liveness.pass ? "PASS" : "FAIL");
    if (!liveness.pass) std::cout << " (" << liveness.reason << ")";
    std::cout << "\n";
    if (!out_dir.empty()) write_run_output(out, out_dir);
    return safety.pass ? 0 : 2;
}

int cmd_check(const std::string& trace_path) {
    std::ifstream f(trace_path);
    if (!f) {
        std::cerr << "cannot open " << trace_path << "\n";
        return 1;
    }
    std::string first;
    std::getline(f, first);
    const std::string marker = "# scenario ";
    if (first.rfind(marker, 0) != 0) {
        std::cerr << "trace lacks embedded scenario header\n";
        return 1;
    }
    hbft::ScenarioConfig cfg =
        hbft::ScenarioConfig::from_json_text(first.substr(marker.size()));
    // Re-run deterministically; the trace file must match byte for byte.
    hbft::RunOutput out = hbft::run_scenario(cfg);
    std::string rest((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
    bool identical = rest == out.trace.serialize();
    hbft::KeyRegistry registry = cfg.build_registry();
    auto safety = hbft::check_safety(out, registry);
    auto liveness = hbft::check_liveness(out);
    std::cout << "replay " << (identical ? "MATCHES" : "DIVERGES") << "\n";
    std::cout << "safety " << (safety.pass ? "PASS" : "FAIL") << "\n";
    for (const auto& v : safety.violations) std::cout << "  " << v << "\n";
    std::cout << "liveness " << (liveness.pass ? "PASS" : "FAIL");
    if (!liveness.pass) std::cout << " (" << liveness.reason << ")";
    std::cout << "\n";
    return (identical && safety.pass) ? 0 : 2;
}

hbft::ScenarioConfig sweep_config(uint32_t clusters, uint32_t replicas, uint64_t seed) {
    hbft::ScenarioConfig cfg;
    cfg.name = "sweep_c" + std::to_string(clusters) + "_n" + std::to_string(replicas);
    cfg.seed = seed;
    cfg.cluster_sizes.assign(clusters, replicas);
    cfg.max_views = 20;
    cfg.params.k_max = 2 * clusters;
    cfg.params.block_size = 50;
    cfg.params.local_view_pace = 400;
    cfg.clients.count = clusters * 2;
    cfg.clients.interval = 400;
    cfg.clients.payload_size = 8;
    cfg.clients.tx_limit = 0;
    return cfg;
}

int cmd_sweep(const std::string& dimension, std::vector<uint32_t> values, uint64_t seed) {
    std::vector<std::pair<double, double>> pts;
    for (uint32_t v : values) {
        hbft::ScenarioConfig cfg = dimension == "clusters" ? sweep_config(v, 4, seed)
                                                           : sweep_config(3, v, seed);
        hbft::RunOutput out = hbft::run_scenario(cfg);
        double per_commit = out.metrics.per_commit_msgs;
        pts.emplace_back(static_cast<double>(v), per_commit);
        std::cout << dimension << "=" << v << " commits="
                  << out.metrics.committed_superblocks << " protocol_msgs="
                  << out.metrics.protocol_msgs << " per_commit=" << per_commit << "\n";
    }
    auto rep = hbft::complexity_report(pts);
    std::cout << "linear fit: slope=" << rep.linear.slope << " r2=" << rep.linear.r2
              << "\n";
    if (pts.size() == 3) {
        std::cout << "quadratic fit: a=" << rep.quad.a << " b=" << rep.quad.b
                  << " d=" << rep.quad.d << " growth_ratio=" << rep.growth_ratio << "\n";
    }
    return 0;
}

int cmd_schedule(uint32_t clusters, uint32_t replicas, uint64_t views) {
    hbft::Topology topo = hbft::Topology::uniform(clusters, replicas);
    std::cout << "view leader_cluster";
    for (hbft::ClusterId c = 0; c < topo.clusters(); ++c)
        std::cout << " rep" << c << " loc_leader" << c << " dissem" << c;
    std::cout << "\n";
    for (hbft::ViewId v = 0; v < views; ++v) {
        std::cout << v << " " << hbft::roles::global_leader_cluster(topo, v);
        for (hbft::ClusterId c = 0; c < topo.clusters(); ++c) {
            std::cout << " " << hbft::roles::representative(topo, c, v).index << " "
                      << hbft::roles::local_leader(topo, c, v, v).index << " "
                      << hbft::roles::disseminator(topo, c, v, v).index;
        }
        std::cout << "\n";
    }
    std::cout << "rotation period: " << hbft::roles::rotation_period(topo) << " views\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hierarchical BFT consensus simulator"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_dir;
    uint64_t seed = 0;
    uint64_t views = 0;
    auto* run = app.add_subcommand("run", "run a scenario");
    run->add_option("--scenario", scenario_path, "scenario JSON file")->required();
    auto* seed_opt = run->add_option("--seed", seed, "seed override");
    auto* views_opt = run->add_option("--views", views, "max global views override");
    run->add_option("--out", out_dir, "output directory (trace, metrics, chains)");

    std::string trace_path;
    auto* check = app.add_subcommand("check", "re-run and verify a recorded trace");
    check->add_option("--trace", trace_path, "trace file from `run --out`")->required();

    std::string dimension;
    std::vector<uint32_t> values;
    uint64_t sweep_seed = 7;
    auto* sweep = app.add_subcommand("sweep", "message-complexity scaling runs");
    sweep->add_option("--dimension", dimension, "clusters|replicas")
        ->required()
        ->check(CLI::IsMember({"clusters", "replicas"}));
    sweep->add_option("--values", values, "parameter values")->required();
    sweep->add_option("--seed", sweep_seed, "seed");

    uint32_t sch_clusters = 3, sch_replicas = 4;
    uint64_t sch_views = 16;
    auto* schedule = app.add_subcommand("schedule", "dump the role schedule");
    schedule->add_option("--clusters", sch_clusters, "cluster count");
    schedule->add_option("--replicas", sch_replicas, "replicas per cluster");
    schedule->add_option("--views", sch_views, "views to print");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(scenario_path, seed, seed_opt->count() > 0, views,
                           views_opt->count() > 0, out_dir);
        if (check->parsed()) return cmd_check(trace_path);
        if (sweep->parsed()) return cmd_sweep(dimension, values, sweep_seed);
        if (schedule->parsed()) return cmd_schedule(sch_clusters, sch_replicas, sch_views);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
