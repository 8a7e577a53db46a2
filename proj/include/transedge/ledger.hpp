#pragma once

#include "transedge/conflict.hpp"
#include "transedge/crypto.hpp"
#include "transedge/merkle.hpp"
#include "transedge/records.hpp"
#include "transedge/topology.hpp"

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace transedge::ledger {

class segment_closed : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class unknown_batch : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

class unknown_transaction : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

class duplicate_vote : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

enum class member_status : std::uint8_t { pending, commit, abort };

struct prepared_member {
    transaction txn;
    prepare_role role = prepare_role::coordinator;
    member_status status = member_status::pending;
    std::optional<commit_record> record;
};

/// Distributed transactions prepared here, grouped by the batch that
/// prepared them. Groups leave strictly oldest first, once no member is pending.
class prepared_batches {
public:
    using group = std::map<txn_id, prepared_member>;

    explicit prepared_batches(conflict::key_index::owner_fn owns) : owns_(std::move(owns)) {}

    void add(batch_id b, prepared_member member);
    void remove_group(batch_id b);
    void remove_member(batch_id b, txn_id t);
    const prepared_member* find(batch_id b, txn_id t) const;

    /// Returns false for an identical repeat; throws duplicate_vote when a
    /// different decision was already recorded.
    bool record_vote(batch_id b, txn_id t, const commit_record& record);

    bool ready(batch_id b) const;
    /// Consecutive ready groups from the oldest, limited to ids below `before`.
    std::vector<batch_id> ready_prefix(batch_id before) const;

    group take(batch_id b);
    void restore(batch_id b, group g);

    const std::map<batch_id, group>& groups() const { return groups_; }
    const conflict::key_index& index() const { return index_; }
    std::size_t member_count() const;

private:
    conflict::key_index::owner_fn owns_;
    std::map<batch_id, group> groups_;
    conflict::key_index index_;
};

struct ledger_config {
    partition_id self = 0;
    std::int32_t partitions = 1;
    key_partitioner partitioner{1};
    std::shared_ptr<const merkle::key_universe> universe;
};

/// Everything a replica needs to re-check a proposal.
struct validation_context {
    const topology* topo = nullptr;
    const crypto::key_registry* keys = nullptr;
    sim_time now = 0;
    sim_time delta = 30000;
};

/// One partition's log: certified batches, the in-progress batch, the
/// prepared-batches structure and the Merkle store over committed data.
class partition_ledger {
public:
    explicit partition_ledger(ledger_config config);

    partition_id self() const { return config_.self; }
    bool owns(const std::string& key) const { return config_.partitioner(key) == config_.self; }

    // certified log
    bool empty() const { return log_.empty(); }
    batch_id latest_index() const { return log_.empty() ? no_batch : log_.back().index; }
    const batch& get_batch(batch_id index) const;
    const batch& get_latest() const;
    /// Earliest certified batch whose LCE reaches `prepare_batch`, if any.
    std::optional<batch_id> earliest_with_lce(batch_id prepare_batch) const;
    batch_id committed_version(const std::string& key) const;
    merkle::leaf_value read(const std::string& key) const;
    const merkle::merkle_store& store() const { return store_; }
    const prepared_batches& prepared() const { return prepared_; }
    cd_vector current_cd() const;
    batch_id current_lce() const;

    // in-progress batch (leader)
    bool open() const { return state_ == state::open; }
    bool sealing() const { return state_ == state::sealing; }
    batch_id next_index() const { return latest_index() + 1; }
    conflict::verdict check(const transaction& txn) const;
    void append_local(const transaction& txn);
    void append_prepared(prepared_entry entry);
    void append_rejected(rejected_entry entry);
    const batch& in_progress() const { return pending_; }
    bool has_pending_work(batch_id drainable_before) const;

    void record_vote(batch_id prepare_batch, txn_id txn, const commit_record& record);

    /// Drains ready groups, derives the vector, applies committed writes to
    /// the Merkle store and stamps the time. The result awaits agreement.
    const batch& seal(sim_time now);
    const batch& commit_sealed(const crypto::quorum_certificate& cert);
    /// Reverts a sealed batch that failed agreement and reopens an empty one.
    batch abort_sealed();

    // replicas
    /// nullopt when the proposal matches what this ledger would produce.
    std::optional<std::string> validate(const batch& proposal, const validation_context& ctx);
    void apply_certified(const batch& certified);

private:
    enum class state { open, sealing };

    conflict::ledger_view view(const conflict::key_index* in_progress, const conflict::key_index* prepared) const;
    std::vector<write_entry> batch_writes(const batch& b) const;
    void install(const batch& b, const std::vector<write_entry>& writes);
    std::optional<std::string> validate_committed(const batch& proposal, const validation_context& ctx) const;
    std::optional<std::string> validate_appended(const batch& proposal, const validation_context& ctx) const;
    void drop_speculative();

    ledger_config config_;
    merkle::merkle_store store_;
    std::vector<batch> log_;
    std::unordered_map<std::string, batch_id> versions_;
    prepared_batches prepared_;
    state state_ = state::open;
    batch pending_;
    conflict::key_index pending_index_;
    std::vector<std::pair<batch_id, prepared_batches::group>> drained_;
    batch_id speculative_ = no_batch; // store version built by the last successful validate
};

} // namespace transedge::ledger
