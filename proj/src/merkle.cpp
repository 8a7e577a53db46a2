#include "transedge/merkle.hpp"

#include <algorithm>
#include <map>

namespace transedge::merkle {

key_universe::key_universe(std::vector<std::string> keys) : keys_(std::move(keys))
{
    std::sort(keys_.begin(), keys_.end());
    keys_.erase(std::unique(keys_.begin(), keys_.end()), keys_.end());
    index_.reserve(keys_.size());
    for (std::size_t i = 0; i < keys_.size(); ++i) index_.emplace(keys_[i], i);
    while (width_ < keys_.size()) {
        width_ <<= 1;
        ++depth_;
    }
}

std::optional<std::size_t> key_universe::position(const std::string& key) const
{
    auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

digest empty_leaf_hash()
{
    static const digest h = [] {
        crypto::canonical_writer w;
        w.u8(0x02);
        return w.finish();
    }();
    return h;
}

digest leaf_hash(const std::string& key, const std::string& value, batch_id version)
{
    crypto::canonical_writer w;
    w.u8(0x00).str(key).str(value).i64(version);
    return w.finish();
}

digest interior_hash(const digest& left, const digest& right)
{
    std::array<std::uint8_t, 65> buf;
    buf[0] = 0x01;
    std::copy(left.begin(), left.end(), buf.begin() + 1);
    std::copy(right.begin(), right.end(), buf.begin() + 33);
    return crypto::sha256(buf);
}

merkle_store::merkle_store(std::shared_ptr<const key_universe> universe) : universe_(std::move(universe))
{
    nodes_.push_back(node{empty_leaf_hash(), 0, 0, -1});
    empty_.push_back(0);
    for (unsigned level = 1; level <= universe_->depth(); ++level) {
        node_ref child = empty_.back();
        nodes_.push_back(node{interior_hash(nodes_[child].hash, nodes_[child].hash), child, child, -1});
        empty_.push_back(static_cast<node_ref>(nodes_.size() - 1));
    }
}

merkle_store::node_ref merkle_store::update(node_ref at, unsigned level, std::uint64_t base,
                                            std::span<const pending_write> writes, batch_id version)
{
    if (writes.empty()) return at;
    if (level == 0) {
        // Writes are position-sorted and stable, so the last one wins.
        const auto& w = *writes.back().entry;
        leaves_.push_back(leaf_value{w.value, version, true});
        nodes_.push_back(node{leaf_hash(w.key, w.value, version), 0, 0, static_cast<std::int32_t>(leaves_.size() - 1)});
        return static_cast<node_ref>(nodes_.size() - 1);
    }
    std::uint64_t mid = base + (std::uint64_t{1} << (level - 1));
    auto split = std::partition_point(writes.begin(), writes.end(),
                                      [mid](const pending_write& p) { return p.position < mid; });
    auto left_span = writes.subspan(0, static_cast<std::size_t>(split - writes.begin()));
    auto right_span = writes.subspan(left_span.size());
    node_ref left = update(nodes_[at].left, level - 1, base, left_span, version);
    node_ref right = update(nodes_[at].right, level - 1, mid, right_span, version);
    nodes_.push_back(node{interior_hash(nodes_[left].hash, nodes_[right].hash), left, right, -1});
    return static_cast<node_ref>(nodes_.size() - 1);
}

digest merkle_store::apply_writes(std::span<const write_entry> writes, batch_id version)
{
    if (!history_.empty() && version <= history_.back().first) {
        throw version_regression("version " + std::to_string(version) + " not after " +
                                 std::to_string(history_.back().first));
    }
    std::vector<pending_write> pending;
    pending.reserve(writes.size());
    for (const auto& w : writes) {
        auto pos = universe_->position(w.key);
        if (!pos) throw key_not_in_universe("key outside partition universe: " + w.key);
        pending.push_back(pending_write{*pos, &w});
    }
    std::stable_sort(pending.begin(), pending.end(),
                     [](const pending_write& a, const pending_write& b) { return a.position < b.position; });
    node_ref base = history_.empty() ? empty_.back() : history_.back().second;
    node_ref root = update(base, universe_->depth(), 0, pending, version);
    history_.emplace_back(version, root);
    return nodes_[root].hash;
}

void merkle_store::rollback_latest()
{
    if (history_.empty()) throw unknown_batch("nothing to roll back");
    history_.pop_back();
}

merkle_store::node_ref merkle_store::root_ref(batch_id version) const
{
    auto it = std::lower_bound(history_.begin(), history_.end(), version,
                               [](const auto& entry, batch_id v) { return entry.first < v; });
    if (it == history_.end() || it->first != version) {
        throw unknown_batch("no root recorded for batch " + std::to_string(version));
    }
    return it->second;
}

digest merkle_store::root_at(batch_id version) const
{
    return nodes_[root_ref(version)].hash;
}

digest merkle_store::latest_root() const
{
    return history_.empty() ? nodes_[empty_.back()].hash : nodes_[history_.back().second].hash;
}

batch_id merkle_store::latest_version() const
{
    return history_.empty() ? no_batch : history_.back().first;
}

bool merkle_store::has_version(batch_id version) const
{
    auto it = std::lower_bound(history_.begin(), history_.end(), version,
                               [](const auto& entry, batch_id v) { return entry.first < v; });
    return it != history_.end() && it->first == version;
}

leaf_value merkle_store::get(const std::string& key, batch_id version) const
{
    auto pos = universe_->position(key);
    if (!pos) throw key_not_in_universe("key outside partition universe: " + key);
    node_ref at = root_ref(version);
    for (unsigned level = universe_->depth(); level > 0; --level) {
        bool right = (*pos >> (level - 1)) & 1U;
        at = right ? nodes_[at].right : nodes_[at].left;
    }
    if (nodes_[at].leaf < 0) return leaf_value{};
    return leaves_[static_cast<std::size_t>(nodes_[at].leaf)];
}

merkle_proof merkle_store::prove(std::span<const std::string> keys, batch_id at_batch) const
{
    merkle_proof proof;
    node_ref root = root_ref(at_batch);
    proof.root = nodes_[root].hash;
    proof.root_batch = at_batch;
    for (const auto& key : keys) {
        auto pos = universe_->position(key);
        if (!pos) throw key_not_in_universe("key outside partition universe: " + key);
        proof_entry e;
        e.key = key;
        e.position = *pos;
        node_ref at = root;
        for (unsigned level = universe_->depth(); level > 0; --level) {
            bool right = (*pos >> (level - 1)) & 1U;
            e.siblings.push_back(right ? nodes_[nodes_[at].left].hash : nodes_[nodes_[at].right].hash);
            at = right ? nodes_[at].right : nodes_[at].left;
        }
        std::reverse(e.siblings.begin(), e.siblings.end());
        if (nodes_[at].leaf >= 0) {
            const auto& leaf = leaves_[static_cast<std::size_t>(nodes_[at].leaf)];
            e.value = leaf.value;
            e.version = leaf.version;
            e.present = true;
        }
        proof.entries.push_back(std::move(e));
    }
    return proof;
}

digest merkle_store::rebuild_root(const key_universe& universe,
                                  const std::vector<std::pair<std::string, leaf_value>>& leaves)
{
    std::vector<digest> level(universe.width(), empty_leaf_hash());
    for (const auto& [key, leaf] : leaves) {
        auto pos = universe.position(key);
        if (!pos) throw key_not_in_universe("key outside partition universe: " + key);
        level[*pos] = leaf.present ? leaf_hash(key, leaf.value, leaf.version) : empty_leaf_hash();
    }
    while (level.size() > 1) {
        std::vector<digest> up(level.size() / 2);
        for (std::size_t i = 0; i < up.size(); ++i) up[i] = interior_hash(level[2 * i], level[2 * i + 1]);
        level = std::move(up);
    }
    return level.front();
}

bool verify_inclusion(const merkle_proof& proof, const key_universe& universe)
{
    for (const auto& e : proof.entries) {
        auto pos = universe.position(e.key);
        if (!pos || *pos != e.position) return false;
        if (e.siblings.size() != universe.depth()) return false;
        digest h;
        if (e.present) {
            h = leaf_hash(e.key, e.value, e.version);
        } else {
            if (!e.value.empty() || e.version != no_batch) return false;
            h = empty_leaf_hash();
        }
        for (unsigned level = 0; level < e.siblings.size(); ++level) {
            bool right = (e.position >> level) & 1U;
            h = right ? interior_hash(e.siblings[level], h) : interior_hash(h, e.siblings[level]);
        }
        if (h != proof.root) return false;
    }
    return true;
}

bool verify_proof(const merkle_proof& proof,
                  const key_universe& universe,
                  const batch_header& claim,
                  const crypto::quorum_certificate& cert,
                  const crypto::key_registry& keys,
                  std::span<const node_id> members,
                  std::uint32_t threshold)
{
    if (!verify_inclusion(proof, universe)) return false;
    if (claim.root != proof.root || claim.index != proof.root_batch) return false;
    if (cert.what != claim.claim_digest()) return false;
    if (cert.threshold < threshold || cert.signatures.size() < threshold) return false;
    return cert.verify(keys, members);
}

} // namespace transedge::merkle
