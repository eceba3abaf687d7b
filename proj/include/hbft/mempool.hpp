#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "hbft/types.hpp"

namespace hbft {

/// FIFO transaction pool, deduplicated by txid. Transactions leave the pool
/// when they appear in a locked block (and are never re-admitted).
class Mempool {
public:
    /// Returns false if the txid is already pooled or already consumed.
    bool add(const Transaction& tx) {
        if (consumed_.count(tx.txid) || by_txid_.count(tx.txid)) return false;
        uint64_t pos = next_pos_++;
        by_txid_.emplace(tx.txid, pos);
        fifo_.emplace(pos, tx);
        return true;
    }

    bool contains(const Digest& txid) const { return by_txid_.count(txid) > 0; }

    /// First `limit` transactions in arrival order, skipping any txid in
    /// `exclude` (transactions already sitting in uncommitted ancestry).
    std::vector<Transaction> front(uint32_t limit, const std::set<Digest>& exclude) const {
        std::vector<Transaction> out;
        for (const auto& [pos, tx] : fifo_) {
            if (out.size() >= limit) break;
            if (exclude.count(tx.txid)) continue;
            out.push_back(tx);
        }
        return out;
    }

    /// Remove transactions that made it into a locked block.
    void consume(const std::vector<Transaction>& txs) {
        for (const auto& tx : txs) {
            consumed_.insert(tx.txid);
            auto it = by_txid_.find(tx.txid);
            if (it == by_txid_.end()) continue;
            fifo_.erase(it->second);
            by_txid_.erase(it);
        }
    }

    void mark_consumed(const Digest& txid) {
        consumed_.insert(txid);
        auto it = by_txid_.find(txid);
        if (it != by_txid_.end()) {
            fifo_.erase(it->second);
            by_txid_.erase(it);
        }
    }

    size_t size() const { return fifo_.size(); }
    bool empty() const { return fifo_.empty(); }

private:
    uint64_t next_pos_ = 0;
    std::map<uint64_t, Transaction> fifo_;
    std::map<Digest, uint64_t> by_txid_;
    std::set<Digest> consumed_;
};

}  // namespace hbft
