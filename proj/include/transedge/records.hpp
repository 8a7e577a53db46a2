#pragma once

#include "transedge/crypto.hpp"
#include "transedge/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace transedge {

using crypto::digest;
using crypto::quorum_certificate;

enum class vote : std::uint8_t { yes, no };
enum class decision : std::uint8_t { commit, abort };

enum class abort_reason : std::uint8_t {
    none,
    stale_read,
    conflicts_in_progress,
    conflicts_prepared,
    negative_vote,
    agreement_failed,
};

std::string_view to_string(abort_reason r);
abort_reason abort_reason_from_string(std::string_view s);

void encode(crypto::canonical_writer& w, const transaction& txn);
void encode(crypto::canonical_writer& w, const cd_vector& cd);
digest txn_digest(const transaction& txn);

/// The read-only segment of a batch; this is what RO responses certify.
struct batch_header {
    partition_id partition = 0;
    batch_id index = 0;
    batch_id lce = no_batch;
    cd_vector cd;
    digest root{};
    sim_time timestamp = 0;

    digest claim_digest() const;
    friend bool operator==(const batch_header&, const batch_header&) = default;
};

/// A participant's (or the coordinator's own) vote, certified by f+1 of
/// the voting cluster after the prepare batch is agreed.
struct prepared_message {
    txn_id txn = 0;
    partition_id partition = 0;
    vote v = vote::yes;
    batch_id prepare_batch = no_batch;
    cd_vector cd;
    quorum_certificate cert;

    digest claim_digest() const;
    friend bool operator==(const prepared_message&, const prepared_message&) = default;
};

/// Sent by the coordinator cluster to every other accessed partition once
/// the batch holding the coordinator's own prepare is agreed.
struct coordinator_prepare {
    transaction txn;
    partition_id coordinator = 0;
    batch_id prepare_batch = no_batch;
    cd_vector cd;
    quorum_certificate cert;

    digest claim_digest() const;
    prepared_message as_vote() const;
    friend bool operator==(const coordinator_prepare&, const coordinator_prepare&) = default;
};

struct commit_record {
    txn_id txn = 0;
    partition_id coordinator = 0;
    decision d = decision::abort;
    std::vector<prepared_message> votes; // one per accessed partition, sorted by partition
    quorum_certificate coordinator_cert; // empty inside the coordinator's own log

    digest claim_digest() const;
    /// commit iff every accessed partition voted yes.
    bool consistent(const std::vector<partition_id>& partitions) const;
    const prepared_message* vote_of(partition_id p) const;
    friend bool operator==(const commit_record&, const commit_record&) = default;
};

/// What a cluster tells the client about its transaction.
struct client_reply_claim {
    txn_id txn = 0;
    partition_id partition = 0;
    bool committed = false;
    abort_reason reason = abort_reason::none;
    batch_id batch = no_batch;

    digest claim_digest() const;
};

enum class prepare_role : std::uint8_t { coordinator, participant };

struct prepared_entry {
    transaction txn;
    prepare_role role = prepare_role::coordinator;
    vote v = vote::yes;
    abort_reason reason = abort_reason::none; // for no votes
    txn_id conflicting = 0;
    std::optional<coordinator_prepare> request; // participant only

    friend bool operator==(const prepared_entry&, const prepared_entry&) = default;
};

struct committed_entry {
    transaction txn;
    batch_id prepare_batch = no_batch;
    commit_record record;

    friend bool operator==(const committed_entry&, const committed_entry&) = default;
};

/// A request the leader refused, kept in the batch so the cluster certifies
/// the abort reply and replicas can re-check the refusal.
struct rejected_entry {
    transaction txn;
    abort_reason reason = abort_reason::none;
    txn_id conflicting = 0;

    friend bool operator==(const rejected_entry&, const rejected_entry&) = default;
};

struct batch {
    partition_id partition = 0;
    batch_id index = 0;
    std::vector<transaction> local;
    std::vector<prepared_entry> prepared;
    std::vector<committed_entry> committed;
    std::vector<rejected_entry> rejected;
    cd_vector cd;
    batch_id lce = no_batch;
    digest root{};
    sim_time timestamp = 0;
    quorum_certificate certificate; // 2f+1 over digest()

    digest digest_value() const;
    batch_header header() const;
    bool empty() const { return local.empty() && prepared.empty() && committed.empty() && rejected.empty(); }
    std::vector<txn_id> txn_ids() const;
};

} // namespace transedge
