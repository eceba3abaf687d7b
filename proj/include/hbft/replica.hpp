#pragma once

#include <memory>
#include <set>

#include "hbft/chain_store.hpp"
#include "hbft/context.hpp"
#include "hbft/global_engine.hpp"
#include "hbft/local_engine.hpp"
#include "hbft/mempool.hpp"

namespace hbft {

/// One protocol participant: local ordering, block dissemination, global
/// agreement, chain/application state. Interacts with the world only through
/// ReplicaContext (messages in/out and timers), one event at a time.
class Replica {
public:
    Replica(const Topology* topo, const KeyRegistry* registry, const Params* params,
            ReplicaId me);

    void start(ReplicaContext& ctx);
    void on_message(const Message& m, ReplicaContext& ctx);
    void on_timer(TimerKind kind, uint64_t gen, ReplicaContext& ctx);

    ReplicaId id() const { return me_; }
    const ChainStore& chain() const { return chain_; }
    const BlockStore& blocks() const { return blocks_; }
    ViewId local_view() const { return local_.view(); }
    ViewId global_view() const { return global_.view(); }

private:
    void on_locked(const Block& block, const LockCertificate& cert, ReplicaContext& ctx);
    void on_executed(const std::vector<ExecutedTx>& txs, ReplicaContext& ctx);
    void handle_block_msg(const BlockMsg& m, ReplicaId from, ReplicaContext& ctx);
    void handle_store_ack(const StoreAck& m, ReplicaId from, ReplicaContext& ctx);
    void handle_client_submit(const ClientSubmit& m, const Address& from,
                              ReplicaContext& ctx);
    void send_acks_if_target(const Block& block, ViewId round, ReplicaContext& ctx);
    void disseminate(const Block& block, const LockCertificate& cert, ViewId round,
                     ReplicaContext& ctx);
    void redisseminate(ReplicaContext& ctx);

    const Topology* topo_;
    const KeyRegistry* registry_;
    const Params* params_;
    ReplicaId me_;

    Mempool mempool_;
    BlockStore blocks_;
    ChainStore chain_;
    LocalEngine local_;
    GlobalEngine global_;

    std::set<Digest> client_facing_;   // txids submitted directly to me
    std::set<Digest> acked_;           // blocks I already acked
    std::map<Digest, uint64_t> last_dissem_;
    uint64_t redissem_timer_gen_ = 0;

    // Engine callbacks fire while an event is being handled; this points at
    // that event's context.
    ReplicaContext* pending_ctx_ = nullptr;
};

}  // namespace hbft
