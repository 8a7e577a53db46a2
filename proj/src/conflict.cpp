#include "transedge/conflict.hpp"

#include <algorithm>

namespace transedge::conflict {

abort_reason verdict::as_abort_reason() const
{
    switch (reason) {
    case verdict_reason::none: return abort_reason::none;
    case verdict_reason::stale_read: return abort_reason::stale_read;
    case verdict_reason::conflicts_in_progress: return abort_reason::conflicts_in_progress;
    case verdict_reason::conflicts_prepared: return abort_reason::conflicts_prepared;
    }
    return abort_reason::none;
}

void key_index::add(const transaction& txn, const owner_fn& owns)
{
    for (const auto& w : txn.write_set) {
        if (owns(w.key)) by_key_[w.key].push_back(access{txn.id, true});
    }
    for (const auto& r : txn.read_set) {
        if (!owns(r.key)) continue;
        bool written = std::any_of(txn.write_set.begin(), txn.write_set.end(),
                                   [&](const write_entry& w) { return w.key == r.key; });
        if (!written) by_key_[r.key].push_back(access{txn.id, false});
    }
}

void key_index::remove(const transaction& txn, const owner_fn& owns)
{
    auto drop = [&](const std::string& key) {
        auto it = by_key_.find(key);
        if (it == by_key_.end()) return;
        auto& v = it->second;
        v.erase(std::remove_if(v.begin(), v.end(), [&](const access& a) { return a.txn == txn.id; }), v.end());
        if (v.empty()) by_key_.erase(it);
    };
    for (const auto& w : txn.write_set) {
        if (owns(w.key)) drop(w.key);
    }
    for (const auto& r : txn.read_set) {
        if (owns(r.key)) drop(r.key);
    }
}

std::optional<std::pair<txn_id, std::string>> key_index::find_conflict(const transaction& txn, const owner_fn& owns) const
{
    auto writes_key = [&](const std::string& key) {
        return std::any_of(txn.write_set.begin(), txn.write_set.end(), [&](const write_entry& w) { return w.key == key; });
    };
    auto probe = [&](const std::string& key) -> std::optional<std::pair<txn_id, std::string>> {
        auto it = by_key_.find(key);
        if (it == by_key_.end()) return std::nullopt;
        bool mine = writes_key(key);
        for (const auto& a : it->second) {
            if (a.txn == txn.id) continue;
            if (mine || a.writes) return std::make_pair(a.txn, key);
        }
        return std::nullopt;
    };
    for (const auto& r : txn.read_set) {
        if (!owns(r.key)) continue;
        if (auto hit = probe(r.key)) return hit;
    }
    for (const auto& w : txn.write_set) {
        if (!owns(w.key)) continue;
        if (auto hit = probe(w.key)) return hit;
    }
    return std::nullopt;
}

verdict check(const transaction& txn, const ledger_view& view)
{
    for (const auto& r : txn.read_set) {
        if (!view.owns(r.key)) continue;
        // The version must match exactly; a later committed write makes the
        // read stale, and an unknown future version is not a valid read.
        if (view.committed_version(r.key) != r.version) {
            return verdict{false, verdict_reason::stale_read, r.key, 0};
        }
    }
    if (view.in_progress != nullptr) {
        if (auto hit = view.in_progress->find_conflict(txn, view.owns)) {
            return verdict{false, verdict_reason::conflicts_in_progress, hit->second, hit->first};
        }
    }
    if (view.prepared != nullptr) {
        if (auto hit = view.prepared->find_conflict(txn, view.owns)) {
            return verdict{false, verdict_reason::conflicts_prepared, hit->second, hit->first};
        }
    }
    return verdict{};
}

std::string_view to_string(edge_type e)
{
    switch (e) {
    case edge_type::wr: return "wr";
    case edge_type::rw: return "rw";
    case edge_type::ww: return "ww";
    }
    return "?";
}

std::set<edge_type> conflicts(const footprint& a, const footprint& b)
{
    std::set<edge_type> out;
    for (const auto& [key, va] : a.writes) {
        for (const auto& r : b.reads) {
            if (r.key == key && r.version == va) out.insert(edge_type::wr);
        }
        for (const auto& [kb, vb] : b.writes) {
            if (kb == key && va < vb) out.insert(edge_type::ww);
        }
    }
    for (const auto& r : a.reads) {
        for (const auto& [kb, vb] : b.writes) {
            if (kb == r.key && vb > r.version) out.insert(edge_type::rw);
        }
    }
    return out;
}

} // namespace transedge::conflict
