#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace transedge {

using partition_id = std::int32_t;
using node_id = std::int32_t;
using batch_id = std::int64_t;
using txn_id = std::uint64_t;
using sim_time = std::int64_t; // milliseconds

// Batch ids start at 0; -1 means "no batch" (no dependency, never written, nothing committed).
inline constexpr batch_id no_batch = -1;

enum class txn_kind : std::uint8_t { local, distributed, read_only };

std::string_view to_string(txn_kind kind);
txn_kind txn_kind_from_string(std::string_view text);

struct read_entry {
    std::string key;
    std::string value;
    batch_id version = no_batch;

    friend bool operator==(const read_entry&, const read_entry&) = default;
};

struct write_entry {
    std::string key;
    std::string value;

    friend bool operator==(const write_entry&, const write_entry&) = default;
};

/// A client transaction as submitted for commitment. Writes are buffered at
/// the client, so `write_set` carries no versions; a key's version is the id
/// of the batch that committed its latest write at the owning partition.
struct transaction {
    txn_id id = 0;
    txn_kind kind = txn_kind::local;
    std::vector<read_entry> read_set;
    std::vector<write_entry> write_set;
    std::vector<partition_id> partitions; // sorted, unique
    partition_id coordinator = -1;        // distributed only

    friend bool operator==(const transaction&, const transaction&) = default;
};

/// Per-batch conflict-dependency vector, one entry per partition.
class cd_vector {
public:
    cd_vector() = default;
    explicit cd_vector(std::size_t partitions) : entries_(partitions, no_batch) {}
    explicit cd_vector(std::vector<batch_id> entries) : entries_(std::move(entries)) {}

    std::size_t size() const { return entries_.size(); }
    batch_id operator[](partition_id p) const { return entries_.at(static_cast<std::size_t>(p)); }
    batch_id& operator[](partition_id p) { return entries_.at(static_cast<std::size_t>(p)); }
    const std::vector<batch_id>& entries() const { return entries_; }

    /// Componentwise maximum; sizes must agree.
    void merge(const cd_vector& other);

    /// True when every entry is >= the matching entry of `other`.
    bool dominates(const cd_vector& other) const;

    friend bool operator==(const cd_vector&, const cd_vector&) = default;

private:
    std::vector<batch_id> entries_;
};

cd_vector pairwise_max(cd_vector a, const cd_vector& b);

/// Hash partitioning of the key space; keys map uniformly across partitions.
class key_partitioner {
public:
    explicit key_partitioner(std::int32_t partitions = 1) : partitions_(partitions) {}
    partition_id operator()(std::string_view key) const;
    std::int32_t partitions() const { return partitions_; }

private:
    std::int32_t partitions_;
};

std::vector<partition_id> partitions_of(const transaction& txn, const key_partitioner& partitioner);

} // namespace transedge
