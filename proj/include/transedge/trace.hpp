#pragma once

#include "transedge/crypto.hpp"
#include "transedge/records.hpp"

#include <array>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

// Append-only run history. Auditors and the serializability oracle read
// only this, so `check` can replay a trace written by another run.
namespace transedge::trace {

inline constexpr int schema_version = 1;

class incomplete_trace : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct header {
    int version = schema_version;
    std::int32_t partitions = 1;
    std::int32_t f = 0;
    std::uint64_t seed = 0;
    std::string faults;                  // fault spec text
    std::vector<node_id> faulty;         // replicas whose events the auditors ignore
    bool unsafe = false;
    std::string ro_mode = "transedge";   // or "twopc"
    sim_time delta = 30000;
    std::map<std::string, std::string> config;
};

struct read_version {
    std::string key;
    batch_id version = no_batch;
};

struct submitted {
    sim_time t = 0;
    txn_id txn = 0;
    std::string cls;
    txn_kind kind = txn_kind::local;
    node_id client = -1;
    std::vector<partition_id> partitions;
};

/// The client's final read set and write keys, sent for commitment.
struct commit_requested {
    sim_time t = 0;
    txn_id txn = 0;
    txn_kind kind = txn_kind::local;
    partition_id coordinator = -1;
    std::vector<partition_id> partitions;
    std::vector<read_version> reads;
    std::vector<std::string> writes;
};

struct prepared_item {
    txn_id txn = 0;
    prepare_role role = prepare_role::coordinator;
    vote v = vote::yes;
    abort_reason reason = abort_reason::none;
    txn_id conflicting = 0;
};

struct committed_item {
    txn_id txn = 0;
    batch_id prepare_batch = no_batch;
    decision d = decision::abort;
};

struct rejected_item {
    txn_id txn = 0;
    abort_reason reason = abort_reason::none;
    txn_id conflicting = 0;
};

/// One replica installed one certified batch.
struct batch_installed {
    sim_time t = 0;
    node_id node = -1;
    partition_id partition = 0;
    batch_id index = 0;
    std::string digest_hex;
    batch_id lce = no_batch;
    std::vector<batch_id> cd;
    sim_time timestamp = 0;
    bool valid = true; // this replica's own re-validation verdict
    std::vector<txn_id> local;
    std::vector<prepared_item> prepared;
    std::vector<committed_item> committed;
    std::vector<rejected_item> rejected;
};

struct agreement_failed {
    sim_time t = 0;
    partition_id partition = 0;
    batch_id index = 0;
    std::string reason;
};

struct reply {
    sim_time t = 0;
    txn_id txn = 0;
    node_id client = -1;
    bool committed = false;
    abort_reason reason = abort_reason::none;
    partition_id partition = 0;
    batch_id batch = no_batch;
};

struct ro_round {
    sim_time t = 0;
    txn_id txn = 0;
    std::uint32_t round = 1;
    partition_id partition = 0;
    node_id node = -1;
    bool ok = false;
    std::string error;
    batch_id batch = no_batch;
    batch_id lce = no_batch;
    std::vector<batch_id> cd;
};

struct ro_read {
    std::string key;
    partition_id partition = 0;
    batch_id version = no_batch;
    batch_id batch = no_batch; // snapshot the value came from
};

struct ro_done {
    sim_time t = 0;
    txn_id txn = 0;
    bool ok = false;
    bool mutant = false;
    std::uint32_t rounds = 1;
    sim_time round1_t = 0; // when the first round finished
    std::uint32_t round1_partitions = 0;
    std::uint32_t round2_partitions = 0;
    std::uint32_t requests = 0;
    std::uint32_t retries = 0;
    std::vector<ro_read> reads;
};

struct messages {
    txn_id txn = 0;
    std::array<std::uint64_t, 4> counts{}; // consensus, twopc, client, ro
};

struct run_end {
    sim_time t = 0;
    bool completed = false;
    std::uint64_t events = 0;
};

using event = std::variant<submitted, commit_requested, batch_installed, agreement_failed, reply, ro_round, ro_done,
                           messages, run_end>;

class trace_log {
public:
    trace_log() = default;
    explicit trace_log(header h) : header_(std::move(h)) {}

    void add(event e) { events_.push_back(std::move(e)); }
    const header& head() const { return header_; }
    header& head() { return header_; }
    const std::vector<event>& events() const { return events_; }

    std::string to_jsonl() const;
    static trace_log from_jsonl(std::string_view text);
    void write(const std::string& path) const;
    static trace_log read(const std::string& path);

private:
    header header_;
    std::vector<event> events_;
};

/// SHA-256 of the JSONL serialization, hex encoded.
std::string trace_hash(const trace_log& log);

} // namespace transedge::trace
