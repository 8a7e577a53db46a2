#pragma once

#include "transedge/records.hpp"
#include "transedge/types.hpp"

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace transedge::conflict {

enum class verdict_reason : std::uint8_t { none, stale_read, conflicts_in_progress, conflicts_prepared };

struct verdict {
    bool ok = true;
    verdict_reason reason = verdict_reason::none;
    std::string key;
    txn_id other = 0;

    abort_reason as_abort_reason() const;
};

/// Per-key record of which transactions touch a key and whether they write it.
class key_index {
public:
    using owner_fn = std::function<bool(const std::string&)>;

    void add(const transaction& txn, const owner_fn& owns);
    void remove(const transaction& txn, const owner_fn& owns);
    void clear() { by_key_.clear(); }
    bool empty() const { return by_key_.empty(); }

    /// First transaction (other than txn itself) that shares an owned key
    /// with txn where at least one side writes it.
    std::optional<std::pair<txn_id, std::string>> find_conflict(const transaction& txn, const owner_fn& owns) const;

private:
    struct access {
        txn_id txn;
        bool writes;
    };
    std::unordered_map<std::string, std::vector<access>> by_key_;
};

/// What the Def.-1 check reads from a partition's ledger.
struct ledger_view {
    key_index::owner_fn owns;
    std::function<batch_id(const std::string&)> committed_version;
    const key_index* in_progress = nullptr;
    const key_index* prepared = nullptr;
};

/// Stale reads first, then the in-progress batch, then prepared-but-not-
/// committed transactions; the first failing rule decides the verdict.
verdict check(const transaction& txn, const ledger_view& view);

enum class edge_type : std::uint8_t { wr, rw, ww };
std::string_view to_string(edge_type e);

/// A committed transaction with the version each of its writes installed.
struct footprint {
    txn_id id = 0;
    std::vector<read_entry> reads;
    std::vector<std::pair<std::string, batch_id>> writes;
};

/// Conflict types from a to b: wr when b read a's version, rw when b
/// overwrote the version a read, ww when b's write follows a's.
std::set<edge_type> conflicts(const footprint& a, const footprint& b);

} // namespace transedge::conflict
