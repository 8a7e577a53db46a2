#pragma once

#include "transedge/readonly.hpp"
#include "transedge/records.hpp"

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

// Typed payloads carried by the simulated network. Everything a receiver
// has to trust is certified over a canonical claim digest; the transport
// itself passes objects, not bytes.
namespace transedge::msg {

using batch_ptr = std::shared_ptr<const batch>;

// intra-cluster agreement
struct propose {
    batch_ptr b;
};

struct validate_reply {
    partition_id partition = 0;
    batch_id index = 0;
    digest what{};
    std::optional<crypto::signature> sig; // empty: rejected
    std::string reject;
};

/// The agreed batch (shared with the proposal it certifies) and its 2f+1 certificate.
struct certified {
    batch_ptr b;
    crypto::quorum_certificate cert;
};

/// A replica's signatures over the claims of one applied batch.
struct reply_sigs {
    partition_id partition = 0;
    batch_id index = 0;
    std::vector<digest> claims;
    std::vector<crypto::signature> sigs;
};

// client <-> cluster
struct read_request {
    txn_id txn = 0;
    std::vector<std::string> keys;
};

struct read_response {
    txn_id txn = 0;
    partition_id partition = 0;
    std::vector<read_entry> values;
};

struct commit_request {
    transaction txn;
    node_id client = -1;
};

struct client_reply {
    client_reply_claim claim;
    quorum_certificate cert;
};

// two-phase commit between clusters
struct coordinator_prepare_msg {
    coordinator_prepare cp;
};

struct prepared_msg {
    prepared_message m;
};

struct commit_msg {
    commit_record rec;
};

// read-only transactions
struct ro_query {
    txn_id txn = 0;
    std::uint32_t round = 1;
    std::vector<std::string> keys;
    batch_id required_lce = no_batch; // round 2 only
};

struct ro_reply {
    txn_id txn = 0;
    partition_id partition = 0;
    std::uint32_t round = 1;
    bool ok = false;
    readonly::ro_response resp;
    std::string error;
};

struct timer {
    std::uint32_t kind = 0;
    std::uint64_t a = 0;
    std::uint64_t b = 0;
};

using payload = std::variant<propose, validate_reply, certified, reply_sigs, read_request, read_response,
                             commit_request, client_reply, coordinator_prepare_msg, prepared_msg, commit_msg,
                             ro_query, ro_reply, timer>;

/// Accounting bucket for per-transaction message audits.
enum class category : std::uint8_t { consensus, twopc, client, ro, timer };
inline constexpr std::size_t category_count = 4; // timers are not messages

std::string_view to_string(category c);

} // namespace transedge::msg
