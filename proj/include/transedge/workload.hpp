#pragma once

#include "transedge/types.hpp"

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace transedge::workload {

class invalid_config : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Flat `key = value` text; `#` starts a comment. Later lines win.
using config_map = std::map<std::string, std::string>;
config_map parse_config(std::string_view text);
config_map load_config(const std::string& path);

enum class txn_class : std::uint8_t { local_rw, dist_rw, read_only, write_only };
std::string_view to_string(txn_class c);

struct mix {
    double local_rw = 30;
    double dist_rw = 40;
    double read_only = 25;
    double write_only = 5;
};

struct workload_config {
    std::int32_t n_partitions = 3;
    std::int32_t f = 1;
    std::int32_t n_keys = 10000;
    std::int32_t key_size = 8;
    std::int32_t value_size = 16;
    std::int32_t n_txns = 2000;
    workload::mix mix;
    std::int32_t reads_per_txn = 3;
    std::int32_t writes_per_txn = 2;
    std::int32_t ro_keys_per_txn = 3;
    std::int32_t ro_partitions_per_txn = 3;
    std::string key_distribution = "uniform-hash";

    std::int32_t replicas_per_cluster() const { return 3 * f + 1; }
    void validate() const;
    /// Consumes the keys it knows from `m` (they are erased).
    void apply(config_map& m);
};

/// Every key the workload can touch, split by owning partition.
class keyspace {
public:
    keyspace(std::int32_t n_keys, std::int32_t key_size, const key_partitioner& partitioner);

    const std::vector<std::string>& all() const { return all_; }
    const std::vector<std::string>& on(partition_id p) const { return per_.at(static_cast<std::size_t>(p)); }
    const key_partitioner& partitioner() const { return partitioner_; }

private:
    key_partitioner partitioner_;
    std::vector<std::string> all_;
    std::vector<std::vector<std::string>> per_;
};

std::string key_name(std::int32_t i, std::int32_t key_size);

struct generated_txn {
    txn_id id = 0;
    txn_class cls = txn_class::local_rw;
    txn_kind kind = txn_kind::local;
    std::vector<std::string> reads;  // program order: reads first
    std::vector<write_entry> writes;
    std::vector<partition_id> partitions;
};

/// Deterministic per seed. Transaction ids start at 1.
std::vector<generated_txn> generate(const workload_config& config, const keyspace& keys, std::uint64_t seed);

/// Span invariants: local/write-only-local touch one partition, distributed
/// at least two, read-only no writes. Returns a description of the first breach.
std::optional<std::string> audit(const generated_txn& t, const key_partitioner& partitioner);

} // namespace transedge::workload
