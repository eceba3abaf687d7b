#include "hbft/chain_store.hpp"

#include <algorithm>

namespace hbft {

std::optional<std::pair<Bytes, Bytes>> parse_kv_payload(const Bytes& payload) {
    auto read = [&](size_t& off) -> std::optional<Bytes> {
        if (off + 4 > payload.size()) return std::nullopt;
        uint32_t len = 0;
        for (int i = 0; i < 4; ++i) len |= static_cast<uint32_t>(payload[off + i]) << (8 * i);
        off += 4;
        if (off + len > payload.size()) return std::nullopt;
        Bytes out(payload.begin() + off, payload.begin() + off + len);
        off += len;
        return out;
    };
    size_t off = 0;
    auto key = read(off);
    if (!key) return std::nullopt;
    auto value = read(off);
    if (!value || off != payload.size()) return std::nullopt;
    return std::make_pair(std::move(*key), std::move(*value));
}

Bytes make_kv_payload(const Bytes& key, const Bytes& value) {
    Encoder e;
    e.bytes(key).bytes(value);
    return e.take();
}

ChainStore::ChainStore(Topology topo, uint32_t k_max)
    : topo_(std::move(topo)), k_max_(k_max) {
    chain_.push_back(Entry{SuperBlock::genesis(), std::nullopt});
}

void ChainStore::add_pending(ClusterId cluster, ViewId local_view, const Digest& d) {
    if (committed_ids_.count(d)) return;
    auto it = committed_view_.find(cluster);
    if (it != committed_view_.end() && local_view <= it->second) return;  // dead
    pending_[cluster].emplace(local_view, d);
}

std::vector<Digest> ChainStore::pending_blocks(ClusterId cluster) const {
    std::vector<Digest> out;
    auto it = pending_.find(cluster);
    if (it == pending_.end()) return out;
    for (const auto& [v, d] : it->second) out.push_back(d);
    return out;
}

std::vector<std::pair<ViewId, Digest>> ChainStore::pending_with_views(
    ClusterId cluster) const {
    std::vector<std::pair<ViewId, Digest>> out;
    auto it = pending_.find(cluster);
    if (it == pending_.end()) return out;
    for (const auto& [v, d] : it->second) out.emplace_back(v, d);
    return out;
}

bool ChainStore::record_durability(const Digest& block, ClusterId cluster,
                                   uint32_t acker) {
    ackers_[block][cluster].insert(acker);
    if (storing_clusters_[block].count(cluster)) return false;
    if (ackers_[block][cluster].size() >= topo_.f(cluster) + 1) {
        storing_clusters_[block].insert(cluster);
        return true;
    }
    return false;
}

void ChainStore::credit_origin(const Digest& block, ClusterId origin) {
    storing_clusters_[block].insert(origin);
}

uint32_t ChainStore::durable_clusters(const Digest& block) const {
    auto it = storing_clusters_.find(block);
    return it == storing_clusters_.end() ? 0 : static_cast<uint32_t>(it->second.size());
}

Validation ChainStore::check_ids(const SuperBlock& sb, const BlockStore& blocks,
                                 const std::set<Digest>& extra_committed, bool full,
                                 bool require_ack_durability) const {
    if (sb.block_ids.size() > k_max_) return Validation::fail("k_max exceeded");
    std::set<Digest> seen;
    for (const auto& id : sb.block_ids) {
        if (!seen.insert(id.digest).second) return Validation::fail("duplicate id");
        if (committed_ids_.count(id.digest) || extra_committed.count(id.digest))
            return Validation::fail("id already committed");
        const auto* entry = blocks.find(id.digest);
        if (!entry) return Validation::fail("unknown block " + id.digest.short_hex());
        if (entry->block.origin != id.cluster) return Validation::fail("origin mismatch");
        if (entry->block.empty()) return Validation::fail("empty block referenced");
    }
    if (!full) return Validation::pass();

    // Per-cluster local order, gap-freedom against pending prefixes, and
    // durability in at least F+1 clusters.
    std::map<ClusterId, std::vector<Digest>> per_cluster;
    for (const auto& id : sb.block_ids) per_cluster[id.cluster].push_back(id.digest);
    for (const auto& [cluster, ids] : per_cluster) {
        // Pending prefix, skipping entries the extension point already holds.
        std::vector<Digest> prefix;
        auto pit = pending_.find(cluster);
        if (pit != pending_.end()) {
            for (const auto& [v, d] : pit->second) {
                if (extra_committed.count(d)) continue;
                prefix.push_back(d);
            }
        }
        if (ids.size() > prefix.size())
            return Validation::fail("beyond pending for cluster " +
                                    std::to_string(cluster));
        for (size_t i = 0; i < ids.size(); ++i) {
            if (ids[i] != prefix[i])
                return Validation::fail("order/gap violation for cluster " +
                                        std::to_string(cluster));
        }
        if (require_ack_durability) {
            for (const auto& d : ids) {
                if (!is_durable(d))
                    return Validation::fail("insufficient durability " + d.short_hex());
            }
        }
    }
    return Validation::pass();
}

Validation ChainStore::validate_superblock(const SuperBlock& sb,
                                           const BlockStore& blocks) const {
    return validate_superblock_at(sb, blocks, head().digest, height() + 1, {}, true);
}

Validation ChainStore::validate_superblock_at(const SuperBlock& sb,
                                              const BlockStore& blocks,
                                              const Digest& expected_prev,
                                              uint64_t expected_height,
                                              const std::set<Digest>& extra,
                                              bool require_ack_durability) const {
    if (sb.prev != expected_prev) return Validation::fail("prev mismatch");
    if (sb.height != expected_height) return Validation::fail("height mismatch");
    if (SuperBlock::compute_digest(sb) != sb.digest)
        return Validation::fail("digest mismatch");
    return check_ids(sb, blocks, extra, /*full=*/true, require_ack_durability);
}

Validation ChainStore::validate_structural(const SuperBlock& sb,
                                           const BlockStore& blocks) const {
    if (sb.prev != head().digest) return Validation::fail("prev mismatch");
    if (sb.height != height() + 1) return Validation::fail("height mismatch");
    if (SuperBlock::compute_digest(sb) != sb.digest)
        return Validation::fail("digest mismatch");
    return check_ids(sb, blocks, {}, /*full=*/false, false);
}

std::vector<BlockRef> ChainStore::missing_blocks(const SuperBlock& sb,
                                                 const BlockStore& blocks) const {
    std::vector<BlockRef> out;
    for (const auto& id : sb.block_ids)
        if (!blocks.contains(id.digest)) out.push_back(id);
    return out;
}

std::vector<BlockRef> ChainStore::select_blocks(const BlockStore& blocks,
                                                const std::set<Digest>& extra) const {
    // Longest durable prefix per cluster, then balanced round-robin take.
    std::map<ClusterId, std::vector<Digest>> eligible;
    for (ClusterId c = 0; c < topo_.clusters(); ++c) {
        auto it = pending_.find(c);
        if (it == pending_.end()) continue;
        for (const auto& [v, d] : it->second) {
            if (extra.count(d)) continue;
            if (!is_durable(d) || !blocks.contains(d)) break;  // prefix ends
            eligible[c].push_back(d);
        }
    }
    std::vector<BlockRef> out;
    for (size_t round = 0; out.size() < k_max_; ++round) {
        bool any = false;
        for (ClusterId c = 0; c < topo_.clusters() && out.size() < k_max_; ++c) {
            auto it = eligible.find(c);
            if (it == eligible.end() || round >= it->second.size()) continue;
            out.push_back(BlockRef{c, it->second[round]});
            any = true;
        }
        if (!any) break;
    }
    return out;
}

std::vector<ExecutedTx> ChainStore::append_and_execute(
    const SuperBlock& sb, std::optional<GlobalCertificate> cert,
    const BlockStore& blocks) {
    std::vector<ExecutedTx> out;
    for (const auto& id : sb.block_ids) {
        const auto* entry = blocks.find(id.digest);
        if (!entry) continue;  // caller guarantees presence via validate_structural
        for (const auto& tx : entry->block.txs) {
            if (executed_.count(tx.txid)) {
                out.push_back(ExecutedTx{tx.txid, tx.client, sb.height, 1});
                continue;
            }
            executed_.emplace(tx.txid, sb.height);
            if (auto kvp = parse_kv_payload(tx.payload)) kv_[kvp->first] = kvp->second;
            out.push_back(ExecutedTx{tx.txid, tx.client, sb.height, 0});
        }
        committed_ids_.insert(id.digest);
        auto& watermark = committed_view_[id.cluster];
        ViewId bv = entry->block.local_view;
        if (bv > watermark) watermark = bv;
    }
    // Drop committed entries and anything now permanently behind the
    // committed watermark (dead blocks; their clients retransmit).
    for (auto& [cluster, pend] : pending_) {
        auto wit = committed_view_.find(cluster);
        ViewId watermark = wit == committed_view_.end() ? 0 : wit->second;
        for (auto it = pend.begin(); it != pend.end();) {
            if (committed_ids_.count(it->second) || it->first <= watermark)
                it = pend.erase(it);
            else
                ++it;
        }
    }
    chain_.push_back(Entry{sb, std::move(cert)});
    return out;
}

std::optional<uint64_t> ChainStore::executed_height(const Digest& txid) const {
    auto it = executed_.find(txid);
    if (it == executed_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> ChainStore::export_chain() const {
    std::vector<std::string> out;
    out.reserve(chain_.size());
    for (const auto& e : chain_) {
        std::string line = "h=" + std::to_string(e.sb.height) + " d=" + e.sb.digest.hex() +
                           " prev=" + e.sb.prev.hex() + " view=" + std::to_string(e.sb.view) +
                           " ids=";
        if (e.sb.block_ids.empty()) line += "-";
        for (size_t i = 0; i < e.sb.block_ids.size(); ++i) {
            if (i) line += ",";
            line += std::to_string(e.sb.block_ids[i].cluster) + ":" +
                    e.sb.block_ids[i].digest.hex();
        }
        out.push_back(std::move(line));
    }
    return out;
}

Digest ChainStore::kv_digest() const {
    Encoder e;
    e.u32(static_cast<uint32_t>(kv_.size()));
    for (const auto& [k, v] : kv_) {
        e.bytes(k);
        e.bytes(v);
    }
    return hash(e.out());
}

}  // namespace hbft
