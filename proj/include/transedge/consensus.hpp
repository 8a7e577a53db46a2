#pragma once

#include "transedge/environment.hpp"
#include "transedge/ledger.hpp"
#include "transedge/messages.hpp"

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

namespace transedge {

struct digest_hash {
    std::size_t operator()(const digest& d) const
    {
        std::size_t h = 0;
        for (std::size_t i = 0; i < sizeof(std::size_t); ++i) h = (h << 8) | d[i];
        return h;
    }
};

namespace consensus {

/// A claim a replica signs after installing a batch, and what the leader
/// does once f+1 replicas agree on it.
struct claim {
    enum class kind : std::uint8_t {
        header,
        coordinator_prepare,
        own_vote,
        participant_vote,
        commit_record,
        client_reply,
    };
    using body_type = std::variant<std::monostate, coordinator_prepare, prepared_message, commit_record,
                                   client_reply_claim>;

    kind what = kind::header;
    digest d{};
    txn_id txn = 0;
    body_type body; // the signed object, for the leader's follow-up message
};

/// Claims of one installed batch in canonical order; the header comes first.
std::vector<claim> batch_claims(const batch& b, partition_id self);

client_reply_claim reply_claim_for(const batch& b, partition_id self, txn_id txn);

} // namespace consensus

namespace twopc {

/// The accessed partition holding most of the transaction's keys; ties go
/// to the lowest partition id.
partition_id choose_coordinator(const transaction& txn, const key_partitioner& partitioner);

struct coordinator_state {
    transaction txn;
    node_id client = -1;
    batch_id prepare_batch = no_batch;
    std::optional<coordinator_prepare> certified_prepare;
    std::optional<prepared_message> own_vote;
    std::map<partition_id, prepared_message> votes; // remote partitions
    bool sent = false;
    bool decided = false;

    bool all_votes_in() const;
    commit_record decide(partition_id self) const;
};

} // namespace twopc

/// One replica: the leader's batching, agreement and 2PC state machines,
/// a backup's validation, and the read-only server every replica runs.
class replica {
public:
    replica(environment& env, node_id id);

    void start();
    void on_message(const net::envelope& e);

    node_id id() const { return id_; }
    partition_id partition() const { return partition_; }
    bool is_leader() const { return leader_; }
    faults::behavior behavior() const { return behavior_; }
    const ledger::partition_ledger& ledger() const { return ledger_; }
    std::size_t open_coordinations() const { return coord_.size(); }

private:
    enum timer_kind : std::uint32_t { tick = 1, agreement_deadline, forward, dep_deadline, flush };

    struct version {
        msg::batch_ptr b;
        digest d{};
        std::vector<crypto::signature> sigs;
        std::vector<node_id> recipients;
        bool certified = false;
        quorum_certificate cert;
    };

    struct agreement {
        batch_id index = 0;
        digest real{};
        std::vector<version> versions;
        std::set<node_id> rejected;
        std::set<node_id> replied;
        std::uint64_t attempt = 0;
        bool installed = false;
    };

    struct held {
        msg::payload payload;
        msg::category cat = msg::category::twopc;
        txn_id txn = 0;
        bool needs_commit = false; // effect is the committed segment, not admission
    };

    struct parked_query {
        node_id client = -1;
        msg::ro_query q;
        sim_time deadline = 0;
    };

    struct pending_claim {
        consensus::claim c;
        batch_id index = 0;
    };

    bool has_header_cert(batch_id index) const;

    // agreement (consensus.cpp)
    void on_tick();
    void seal_and_propose();
    crypto::signature sign_digest(const digest& d) const;
    bool valid_signature(node_id from, const digest& d, const crypto::signature& s) const;
    void on_validate_reply(node_id from, const msg::validate_reply& r);
    void check_agreement();
    void on_agreement_deadline(batch_id index, std::uint64_t attempt);
    void fail_agreement(const std::string& reason);
    void flush_certified();
    void on_propose(node_id from, const msg::batch_ptr& b);
    void handle_proposal(const msg::batch_ptr& b);
    void on_certified(node_id from, const msg::certified& m);
    void apply(const msg::certified& m);
    void drain_buffered();
    void installed(const batch& b, const digest& d, bool valid);
    ledger::validation_context context() const;

    // claims and f+1 certificates
    void publish_claims(const batch& b);
    void on_reply_sigs(node_id from, const msg::reply_sigs& m);
    void try_claim(const digest& d);
    void run_claim(const pending_claim& p, const quorum_certificate& cert);

    // clients and 2PC (twopc.cpp)
    void on_commit_request(node_id from, const msg::commit_request& m);
    void on_coordinator_prepare(node_id from, const msg::coordinator_prepare_msg& m);
    void on_prepared(node_id from, const msg::prepared_msg& m);
    void on_commit(node_id from, const msg::commit_msg& m);
    void admit_inbox();
    void admit(const msg::payload& p);
    void maybe_seal_full();
    void try_send_prepare(txn_id t);
    void try_decide(txn_id t);
    void send_to_cluster(partition_id p, const msg::payload& payload, msg::category cat, txn_id txn);
    void hold(const msg::payload& payload, msg::category cat, txn_id txn, bool needs_commit);
    void on_forward_timer(std::uint64_t id);
    void note_installed(const batch& b);
    void requeue_failed(batch failed);

    // reads (ro_server.cpp)
    void on_read_request(node_id from, const msg::read_request& m);
    void on_ro_query(node_id from, const msg::ro_query& q);
    void serve(node_id client, const msg::ro_query& q, batch_id index);
    void serve_parked();
    void on_dep_deadline();
    std::optional<batch_id> latest_served_batch() const;

    environment& env_;
    node_id id_;
    partition_id partition_;
    bool leader_;
    faults::behavior behavior_;
    const faults::fault_spec* spec_;
    ledger::partition_ledger ledger_;

    // leader
    std::optional<agreement> agreement_;
    sim_time last_seal_ = -1'000'000;
    std::deque<msg::payload> inbox_;
    std::unordered_set<txn_id> admitted_;
    std::unordered_map<txn_id, node_id> client_of_;
    std::unordered_map<txn_id, twopc::coordinator_state> coord_;

    // backup
    std::map<batch_id, digest> signed_;
    std::map<batch_id, std::map<digest, bool>> validated_;
    std::map<batch_id, msg::batch_ptr> future_proposals_;
    std::map<batch_id, msg::certified> future_certified_;
    std::map<batch_id, std::pair<msg::batch_ptr, digest>> proposal_digest_; // avoids rehashing the certified copy
    std::unordered_set<txn_id> seen_admitted_;
    std::unordered_set<txn_id> seen_committed_;
    std::unordered_map<std::uint64_t, held> held_;
    std::uint64_t next_hold_ = 1;

    // claims
    std::unordered_map<digest, std::vector<crypto::signature>, digest_hash> pool_;
    std::unordered_map<digest, std::vector<pending_claim>, digest_hash> waiting_;
    std::unordered_set<digest, digest_hash> completed_;
    std::vector<quorum_certificate> header_certs_;
    batch_id latest_header_cert_ = no_batch;

    // read-only server
    std::vector<parked_query> parked_;
};

} // namespace transedge
