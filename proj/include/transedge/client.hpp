#pragma once

#include "transedge/environment.hpp"
#include "transedge/workload.hpp"

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace transedge {

struct client_options {
    std::string ro_mode = "transedge"; // "twopc" runs read-only work as ordinary commits
    bool mutant = false;               // skip the dependency check: always one round
    sim_time ro_timeout = 1000;        // per query, before trying the next replica
};

/// A closed-loop client: one transaction at a time, in submission order.
class client {
public:
    client(environment& env, node_id id, client_options options);

    /// Queues a transaction that may not start before `not_before`.
    void enqueue(workload::generated_txn t, sim_time not_before);
    void start();
    void on_message(const net::envelope& e);

    node_id id() const { return id_; }
    bool idle() const { return !active_ && queue_.empty(); }
    std::size_t finished() const { return finished_; }

private:
    enum timer_kind : std::uint32_t { begin = 1, ro_deadline, ro_reask };
    static constexpr std::uint32_t max_not_ready_rounds = 5;

    struct queued {
        workload::generated_txn txn;
        sim_time not_before = 0;
    };

    struct partition_query {
        std::vector<std::string> keys;
        std::uint32_t round = 1;
        batch_id required_lce = no_batch;
        std::set<node_id> tried;
        node_id target = -1;
        std::uint64_t attempt = 0;
        bool only_not_ready = true;      // every refusal in this rotation was not_ready
        std::uint32_t not_ready_rounds = 0;
        bool done = false;
        std::optional<readonly::ro_response> accepted;
    };

    struct active {
        workload::generated_txn txn;
        bool read_only = false; // run through the two-round protocol
        // read-write
        std::map<partition_id, std::vector<std::string>> read_keys;
        std::set<partition_id> awaiting_reads;
        std::vector<read_entry> reads;
        partition_id home = -1;
        bool committing = false;
        // read-only
        std::uint32_t round = 1;
        sim_time round1_t = 0;
        std::map<partition_id, partition_query> queries;
        std::map<partition_id, readonly::ro_response> final_responses;
        std::uint32_t round1_partitions = 0;
        std::uint32_t round2_partitions = 0;
        std::uint32_t requests = 0;
        std::uint32_t retries = 0;
    };

    void begin_next();
    void begin_rw();
    void send_commit();
    void on_read_response(const msg::read_response& m);
    void on_client_reply(const msg::client_reply& m);

    void begin_ro();
    void start_round(std::uint32_t round, const std::vector<readonly::unsatisfied_dependency>& need);
    void ask_all();
    void ask(partition_id p);
    void on_ro_reply(node_id from, const msg::ro_reply& m);
    void on_ro_deadline(partition_id p, std::uint64_t attempt);
    void on_ro_reask(partition_id p, std::uint64_t attempt);
    void reject(partition_id p, const std::string& why);
    void round_complete();
    void finish_ro(bool ok);
    void finish();

    environment& env_;
    node_id id_;
    client_options options_;
    std::deque<queued> queue_;
    std::optional<active> active_;
    std::uint64_t next_attempt_ = 1;
    std::size_t finished_ = 0;
};

} // namespace transedge
