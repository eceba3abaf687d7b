#include "hbft/simulator.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <variant>

namespace hbft {

namespace {

Digest digest_hint(const MsgBody& b) {
    return std::visit(
        [](const auto& m) -> Digest {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ProposeL>) return m.block.digest;
            else if constexpr (std::is_same_v<T, VoteL>) return m.block;
            else if constexpr (std::is_same_v<T, QCertL>) return m.block;
            else if constexpr (std::is_same_v<T, BlockMsg>) return m.block.digest;
            else if constexpr (std::is_same_v<T, StoreAck>) return m.block;
            else if constexpr (std::is_same_v<T, BlockFetchReq>) return m.digest;
            else if constexpr (std::is_same_v<T, BlockFetchResp>) return m.block.digest;
            else if constexpr (std::is_same_v<T, SbFetchReq>) return m.digest;
            else if constexpr (std::is_same_v<T, SbFetchResp>) return m.sb.digest;
            else if constexpr (std::is_same_v<T, NewViewG>)
                return m.conf.h_prime ? *m.conf.h_prime : Digest{};
            else if constexpr (std::is_same_v<T, PrepareG>) return m.sb.digest;
            else if constexpr (std::is_same_v<T, PrepConfirmG>)
                return m.conf.h ? *m.conf.h : Digest{};
            else if constexpr (std::is_same_v<T, PcomConfirmG>)
                return m.conf.h ? *m.conf.h : Digest{};
            else if constexpr (std::is_same_v<T, PrecommitG>)
                return !m.cert.confs.empty() && m.cert.confs.front().h
                           ? *m.cert.confs.front().h
                           : Digest{};
            else if constexpr (std::is_same_v<T, DecideG>)
                return !m.cert.confs.empty() && m.cert.confs.front().h
                           ? *m.cert.confs.front().h
                           : Digest{};
            else if constexpr (std::is_same_v<T, SignRequest>)
                return m.h ? *m.h : Digest{};
            else if constexpr (std::is_same_v<T, ClientSubmit>) return m.tx.txid;
            else if constexpr (std::is_same_v<T, ClientReplyMsg>) return m.txid;
            else return Digest{};
        },
        b);
}

uint64_t view_hint(const MsgBody& b) {
    return std::visit(
        [](const auto& m) -> uint64_t {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, NewViewL>) return m.view;
            else if constexpr (std::is_same_v<T, ProposeL>) return m.view;
            else if constexpr (std::is_same_v<T, VoteL>) return m.view;
            else if constexpr (std::is_same_v<T, QCertL>) return m.view;
            else if constexpr (std::is_same_v<T, NewViewG>) return m.conf.v;
            else if constexpr (std::is_same_v<T, PrepareG>) return m.ext.v;
            else if constexpr (std::is_same_v<T, PrepConfirmG>) return m.conf.v;
            else if constexpr (std::is_same_v<T, PcomConfirmG>) return m.conf.v;
            else if constexpr (std::is_same_v<T, PrecommitG>)
                return m.cert.confs.empty() ? 0 : m.cert.confs.front().v;
            else if constexpr (std::is_same_v<T, DecideG>)
                return m.cert.confs.empty() ? 0 : m.cert.confs.front().v;
            else if constexpr (std::is_same_v<T, SignRequest>) return m.view;
            else if constexpr (std::is_same_v<T, ExtSignRequest>) return m.view;
            else return 0;
        },
        b);
}

struct EvDeliver {
    Message msg;
};
struct EvTimer {
    ReplicaId r;
    TimerKind kind;
    uint64_t gen;
};
struct EvClientTick {
    uint32_t client;
};
struct EvClientTimeout {
    uint32_t client;
    Digest txid;
    uint32_t attempt;
};
struct EvCrashCluster {
    ClusterId cluster;
};
struct EvCrashReplica {
    ReplicaId r;
};

using EventBody =
    std::variant<EvDeliver, EvTimer, EvClientTick, EvClientTimeout, EvCrashCluster,
                 EvCrashReplica>;

struct Event {
    uint64_t time;
    uint64_t seq;
    EventBody body;
};

struct EventAfter {
    bool operator()(const Event& a, const Event& b) const {
        if (a.time != b.time) return a.time > b.time;
        return a.seq > b.seq;
    }
};

class Simulation;

class SimContext final : public ReplicaContext {
public:
    SimContext(Simulation* sim, ReplicaId me) : sim_(sim), me_(me) {}
    uint64_t now() const override;
    void send(const Address& to, Layer layer, MsgBody body, uint32_t step) override;
    uint64_t set_timer(TimerKind kind, uint64_t delay) override;
    void trace(TraceEv ev, Layer layer, uint64_t view, uint64_t aux, const Digest& d,
               std::string detail) override;

private:
    Simulation* sim_;
    ReplicaId me_;
};

struct ClientState {
    uint32_t id = 0;
    ClusterId preferred = 0;
    uint64_t next_seq = 0;
    uint64_t submitted = 0;
    struct Pending {
        Transaction tx;
        uint64_t first_submit = 0;
        uint32_t attempt = 0;
    };
    std::map<Digest, Pending> pending;
};

class Simulation {
public:
    explicit Simulation(const ScenarioConfig& cfg)
        : cfg_(cfg),
          topo_(cfg.topology()),
          registry_(cfg.build_registry()),
          rng_(cfg.seed) {
        cfg_.validate();
        uint32_t flat = 0;
        for (ClusterId c = 0; c < topo_.clusters(); ++c) {
            for (uint32_t k = 0; k < topo_.size(c); ++k) {
                ReplicaId id{c, k};
                flat_of_[id] = flat++;
                replicas_.push_back(
                    std::make_unique<Replica>(&topo_, &registry_, &cfg_.params, id));
                contexts_.push_back(std::make_unique<SimContext>(this, id));
                crashed_.push_back(false);
                timer_gens_.push_back({});
                std::vector<FaultSpec> mine;
                for (const auto& f : cfg_.faults) {
                    if (f.kind == FaultKind::CrashReplica ||
                        f.kind == FaultKind::CrashCluster)
                        continue;
                    if (f.cluster && *f.cluster != id.cluster) continue;
                    if (f.replica && (*f.replica != id.index ||
                                      (f.cluster && *f.cluster != id.cluster)))
                        continue;
                    mine.push_back(f);
                }
                boxes_.emplace_back(&topo_, id, std::move(mine));
            }
        }
        for (uint32_t i = 0; i < cfg_.clients.count; ++i) {
            ClientState c;
            c.id = i;
            c.preferred = static_cast<ClusterId>(i % topo_.clusters());
            clients_.push_back(c);
        }
    }

    RunOutput run() {
        // Crash activations first, then replica start, then client ticks.
        for (const auto& f : cfg_.faults) {
            if (f.kind == FaultKind::CrashCluster)
                push(f.at_time, EvCrashCluster{*f.cluster});
            else if (f.kind == FaultKind::CrashReplica)
                push(f.at_time, EvCrashReplica{ReplicaId{*f.cluster, *f.replica}});
        }
        for (auto& r : replicas_) {
            current_ = r->id();
            r->start(*contexts_[flat_of_[r->id()]]);
            flush_outbox();
        }
        for (auto& c : clients_) {
            push(1 + c.id, EvClientTick{c.id});
        }

        uint64_t processed = 0;
        while (!queue_.empty()) {
            Event ev = queue_.top();
            queue_.pop();
            if (ev.time < now_) throw std::logic_error("time went backwards");
            now_ = ev.time;
            if (++processed > 200'000'000ull)
                throw std::runtime_error("event budget exceeded");
            bool stop = false;
            std::visit([&](auto& body) { stop = dispatch(body); }, ev.body);
            if (stop) break;
        }
        return finish();
    }

    // --- context services -----------------------------------------------------

    uint64_t now() const { return now_; }

    void buffer_send(ReplicaId from, const Address& to, Layer layer, MsgBody body,
                     uint32_t step) {
        outbox_.push_back(BehaviorBox::OutMsg{to, layer, std::move(body), step, 0});
        outbox_from_ = from;
    }

    uint64_t arm_timer(ReplicaId r, TimerKind kind, uint64_t delay) {
        uint64_t gen = ++timer_gens_[flat_of_[r]][static_cast<size_t>(kind)];
        push(now_ + delay, EvTimer{r, kind, gen});
        return gen;
    }

    void trace_from(ReplicaId r, TraceEv ev, Layer layer, uint64_t view, uint64_t aux,
                    const Digest& d, std::string detail = {}) {
        TraceRecord rec;
        rec.time = now_;
        rec.cluster = r.cluster;
        rec.index = r.index;
        rec.ev = ev;
        rec.layer = layer;
        rec.view = view;
        rec.aux = aux;
        rec.d = d;
        rec.detail = std::move(detail);
        trace_.append(std::move(rec));
    }

private:
    void push(uint64_t time, EventBody body) {
        queue_.push(Event{time, next_seq_++, std::move(body)});
    }

    void trace_harness(TraceEv ev, Layer layer, uint64_t view, uint64_t aux,
                       const Digest& d, std::string detail = {}) {
        TraceRecord rec;
        rec.time = now_;
        rec.cluster = TraceRecord::kHarness;
        rec.index = 0;
        rec.ev = ev;
        rec.layer = layer;
        rec.view = view;
        rec.aux = aux;
        rec.d = d;
        rec.detail = std::move(detail);
        trace_.append(std::move(rec));
    }

    uint64_t sample_latency(ClusterId from, ClusterId to) {
        uint64_t base = from == to ? rng_.uniform(cfg_.intra.lo, cfg_.intra.hi)
                                   : rng_.uniform(cfg_.inter.lo, cfg_.inter.hi);
        if (now_ < cfg_.gst) base += rng_.uniform(cfg_.pregst_extra.lo, cfg_.pregst_extra.hi);
        return std::max<uint64_t>(base, 1);
    }

    void flush_outbox() {
        if (outbox_.empty()) return;
        ReplicaId from = outbox_from_;
        uint32_t flat = flat_of_[from];
        std::vector<BehaviorBox::OutMsg> batch = std::move(outbox_);
        outbox_.clear();

        if (boxes_[flat].has_behaviors()) {
            RoleSnapshot roles_now{replicas_[flat]->local_view(),
                                   replicas_[flat]->global_view()};
            uint64_t omitted = 0;
            // Transform per homogeneous run of message kinds, so recipient
            // splitting acts on one logical fan-out at a time.
            std::vector<BehaviorBox::OutMsg> result;
            size_t i = 0;
            while (i < batch.size()) {
                size_t j = i;
                while (j < batch.size() &&
                       msg_kind_id(batch[j].body) == msg_kind_id(batch[i].body))
                    j++;
                std::vector<BehaviorBox::OutMsg> group(batch.begin() + i,
                                                       batch.begin() + j);
                auto transformed = boxes_[flat].transform(group, roles_now, now_, &omitted);
                for (auto& t : transformed) result.push_back(std::move(t));
                i = j;
            }
            if (omitted)
                trace_from(from, TraceEv::Behavior, Layer::Global, roles_now.global_view,
                           omitted, Digest{}, "omitted");
            batch = std::move(result);
        }

        for (auto& m : batch) {
            Message msg;
            msg.from = Address::of(from);
            msg.to = m.to;
            msg.layer = m.layer;
            msg.step = m.step;
            msg.body = std::move(m.body);
            std::string detail;
            if (msg.step) detail = "step=" + std::to_string(msg.step);
            trace_from(from, TraceEv::Send, msg.layer, view_hint(msg.body),
                       msg_kind_id(msg.body), digest_hint(msg.body), detail);
            ClusterId dst =
                msg.to.is_client ? clients_[msg.to.client].preferred : msg.to.replica.cluster;
            uint64_t lat = sample_latency(from.cluster, dst) + m.extra_delay;
            push(now_ + lat, EvDeliver{std::move(msg)});
        }
    }

    // --- event dispatch ---------------------------------------------------------

    bool dispatch(EvDeliver& ev) {
        Message& m = ev.msg;
        if (m.to.is_client) {
            handle_client_delivery(m);
            return false;
        }
        uint32_t flat = flat_of_[m.to.replica];
        if (crashed_[flat]) return false;
        trace_from(m.to.replica, TraceEv::Deliver, m.layer, view_hint(m.body),
                   msg_kind_id(m.body), digest_hint(m.body));
        current_ = m.to.replica;
        replicas_[flat]->on_message(m, *contexts_[flat]);
        flush_outbox();
        return past_view_budget(flat);
    }

    bool dispatch(EvTimer& ev) {
        uint32_t flat = flat_of_[ev.r];
        if (crashed_[flat]) return false;
        if (timer_gens_[flat][static_cast<size_t>(ev.kind)] != ev.gen) return false;
        current_ = ev.r;
        replicas_[flat]->on_timer(ev.kind, ev.gen, *contexts_[flat]);
        flush_outbox();
        return past_view_budget(flat);
    }

    bool dispatch(EvClientTick& ev) {
        ClientState& c = clients_[ev.client];
        if (cfg_.clients.tx_limit && c.submitted >= cfg_.clients.tx_limit) return false;
        uint64_t seq = c.next_seq++;
        c.submitted++;
        Bytes key = key_for(c.id, seq);
        Bytes value = value_for(c.id, seq);
        Transaction tx = Transaction::make(c.id, seq, make_kv_payload(key, value));
        c.pending.emplace(tx.txid, ClientState::Pending{tx, now_, 0});
        submit(c, tx, 0);
        push(now_ + cfg_.clients.interval, EvClientTick{c.id});
        return false;
    }

    bool dispatch(EvClientTimeout& ev) {
        ClientState& c = clients_[ev.client];
        auto it = c.pending.find(ev.txid);
        if (it == c.pending.end()) return false;
        if (it->second.attempt != ev.attempt) return false;
        it->second.attempt++;
        submit(c, it->second.tx, it->second.attempt);
        return false;
    }

    bool dispatch(EvCrashCluster& ev) {
        for (uint32_t k = 0; k < topo_.size(ev.cluster); ++k)
            crash(ReplicaId{ev.cluster, k});
        return false;
    }

    bool dispatch(EvCrashReplica& ev) {
        crash(ev.r);
        return false;
    }

    void crash(ReplicaId r) {
        uint32_t flat = flat_of_[r];
        if (crashed_[flat]) return;
        crashed_[flat] = true;
        trace_from(r, TraceEv::Crash, Layer::Local, 0, 0, Digest{});
    }

    bool past_view_budget(uint32_t flat) {
        return replicas_[flat]->global_view() > cfg_.max_views;
    }

    // --- clients -----------------------------------------------------------------

    Bytes key_for(uint32_t client, uint64_t seq) {
        Encoder e;
        e.u8(0x6b).u64(cfg_.seed).u64(client).u64(seq);
        Digest d = hash(e.out());
        return Bytes(d.bytes.begin(), d.bytes.begin() + 8);
    }

    Bytes value_for(uint32_t client, uint64_t seq) {
        Encoder e;
        e.u8(0x76).u64(cfg_.seed).u64(client).u64(seq);
        Digest d = hash(e.out());
        Bytes out;
        while (out.size() < cfg_.clients.payload_size) {
            out.insert(out.end(), d.bytes.begin(), d.bytes.end());
            d = hash(out);
        }
        out.resize(cfg_.clients.payload_size);
        return out;
    }

    void submit(ClientState& c, const Transaction& tx, uint32_t attempt) {
        ClusterId target = static_cast<ClusterId>((c.preferred + attempt) % topo_.clusters());
        trace_harness(TraceEv::Submit, Layer::Client, 0, c.id, tx.txid,
                      attempt ? "retry=" + std::to_string(attempt) : "");
        for (uint32_t k = 0; k < topo_.size(target); ++k) {
            Message m;
            m.from = Address::of_client(c.id);
            m.to = Address::of(ReplicaId{target, k});
            m.layer = Layer::Client;
            m.body = ClientSubmit{tx};
            trace_harness(TraceEv::Send, Layer::Client, 0, msg_kind_id(m.body), tx.txid);
            uint64_t lat = sample_latency(c.preferred, target);
            push(now_ + lat, EvDeliver{std::move(m)});
        }
        push(now_ + cfg_.clients.timeout, EvClientTimeout{c.id, tx.txid, attempt});
    }

    void handle_client_delivery(const Message& m) {
        const auto* reply = std::get_if<ClientReplyMsg>(&m.body);
        if (!reply) return;
        ClientState& c = clients_[m.to.client];
        TraceRecord rec;
        rec.time = now_;
        rec.cluster = TraceRecord::kHarness;
        rec.index = c.id;
        rec.ev = TraceEv::Deliver;
        rec.layer = Layer::Client;
        rec.view = 0;
        rec.aux = msg_kind_id(m.body);
        rec.d = reply->txid;
        trace_.append(std::move(rec));
        auto it = c.pending.find(reply->txid);
        if (it == c.pending.end()) return;  // duplicate reply
        c.pending.erase(it);
    }

    RunOutput finish() {
        RunOutput out;
        out.config = cfg_;
        out.metrics = compute_metrics(trace_);
        for (auto& r : replicas_) {
            uint32_t flat = flat_of_[r->id()];
            ReplicaExport ex;
            ex.id = r->id();
            ex.crashed = crashed_[flat];
            ex.height = r->chain().height();
            ex.global_view = r->global_view();
            ex.chain = r->chain().export_chain();
            for (const auto& e : r->chain().chain()) ex.superblocks.push_back(e.sb);
            ex.kv = r->chain().kv_digest();
            for (const auto& [d, entry] : r->blocks().entries())
                out.block_data.emplace(d, entry.block);
            out.exports.push_back(std::move(ex));
        }
        out.trace = std::move(trace_);
        return out;
    }

    friend class SimContext;

    ScenarioConfig cfg_;
    Topology topo_;
    KeyRegistry registry_;
    Rng rng_;

    std::vector<std::unique_ptr<Replica>> replicas_;
    std::vector<std::unique_ptr<SimContext>> contexts_;
    std::vector<bool> crashed_;
    std::vector<std::array<uint64_t, 8>> timer_gens_;
    std::vector<BehaviorBox> boxes_;
    std::map<ReplicaId, uint32_t> flat_of_;
    std::vector<ClientState> clients_;

    std::priority_queue<Event, std::vector<Event>, EventAfter> queue_;
    uint64_t next_seq_ = 0;
    uint64_t now_ = 0;
    ReplicaId current_;
    std::vector<BehaviorBox::OutMsg> outbox_;
    ReplicaId outbox_from_;
    TraceLog trace_;
};

uint64_t SimContext::now() const { return sim_->now(); }

void SimContext::send(const Address& to, Layer layer, MsgBody body, uint32_t step) {
    sim_->buffer_send(me_, to, layer, std::move(body), step);
}

uint64_t SimContext::set_timer(TimerKind kind, uint64_t delay) {
    return sim_->arm_timer(me_, kind, delay);
}

void SimContext::trace(TraceEv ev, Layer layer, uint64_t view, uint64_t aux,
                       const Digest& d, std::string detail) {
    sim_->trace_from(me_, ev, layer, view, aux, d, std::move(detail));
}

}  // namespace

RunOutput run_scenario(const ScenarioConfig& cfg) {
    Simulation sim(cfg);
    return sim.run();
}

Metrics compute_metrics(const TraceLog& trace) {
    Metrics m;
    std::map<Digest, uint64_t> first_submit;
    std::map<Digest, uint64_t> first_reply_at_client;
    std::set<Digest> replied_tx;
    std::set<uint64_t> committed_heights;
    std::map<uint64_t, std::set<uint32_t>> steps_by_view;  // committed views fill later
    std::set<uint64_t> decided_views;

    for (const auto& r : trace.records()) {
        m.duration = std::max(m.duration, r.time);
        switch (r.ev) {
            case TraceEv::Send:
                switch (r.layer) {
                    case Layer::Local: m.sends_local++; break;
                    case Layer::Dissem: m.sends_dissem++; break;
                    case Layer::Global: m.sends_global++; break;
                    case Layer::Client: m.sends_client++; break;
                }
                if (r.layer == Layer::Global && !r.detail.empty() &&
                    r.detail.rfind("step=", 0) == 0) {
                    uint32_t step = static_cast<uint32_t>(std::stoul(r.detail.substr(5)));
                    steps_by_view[r.view].insert(step);
                }
                break;
            case TraceEv::Submit:
                if (!first_submit.count(r.d)) first_submit[r.d] = r.time;
                break;
            case TraceEv::Deliver:
                if (r.layer == Layer::Client && r.cluster == TraceRecord::kHarness &&
                    !first_reply_at_client.count(r.d))
                    first_reply_at_client[r.d] = r.time;
                break;
            case TraceEv::Reply:
                replied_tx.insert(r.d);
                break;
            case TraceEv::Execute:
                committed_heights.insert(r.aux);
                break;
            case TraceEv::Decide:
                decided_views.insert(r.view);
                if (!m.first_commit_view) m.first_commit_view = r.view;
                m.last_commit_view = std::max(m.last_commit_view, r.view);
                break;
            case TraceEv::ViewG:
                m.views_reached = std::max(m.views_reached, r.view);
                break;
            default:
                break;
        }
    }

    m.committed_superblocks = committed_heights.size();
    m.committed_tx = replied_tx.size();
    m.protocol_msgs = m.sends_local + m.sends_dissem + m.sends_global;
    if (m.committed_superblocks)
        m.per_commit_msgs =
            static_cast<double>(m.protocol_msgs) / m.committed_superblocks;
    if (m.duration > 0)
        m.throughput_tx_per_s = static_cast<double>(m.committed_tx) * 1e6 / m.duration;

    std::vector<uint64_t> latencies;
    for (const auto& [txid, t0] : first_submit) {
        auto it = first_reply_at_client.find(txid);
        if (it == first_reply_at_client.end()) continue;
        latencies.push_back(it->second - t0);
    }
    std::sort(latencies.begin(), latencies.end());
    if (!latencies.empty()) {
        m.latency.count = latencies.size();
        uint64_t sum = 0;
        for (auto v : latencies) sum += v;
        m.latency.avg = sum / latencies.size();
        m.latency.p50 = latencies[latencies.size() / 2];
        m.latency.p99 = latencies[(latencies.size() * 99) / 100];
        m.latency.max = latencies.back();
    }

    for (auto v : decided_views) {
        auto it = steps_by_view.find(v);
        m.steps_per_commit.push_back(
            it == steps_by_view.end() ? 0 : static_cast<uint32_t>(it->second.size()));
    }
    return m;
}

}  // namespace hbft
