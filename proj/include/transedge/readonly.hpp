#pragma once

#include "transedge/merkle.hpp"
#include "transedge/records.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace transedge::readonly {

/// Pairwise max of the previous vector, every reported remote vector and
/// the direct prepare-batch dependency of each committed record; the own
/// entry becomes `index`. Aborted records contribute nothing.
cd_vector derive_dep_vector(const cd_vector& prev, partition_id self, batch_id index,
                            std::span<const committed_entry> committed);

/// A certified snapshot answer for the keys a client asked of one partition.
struct ro_response {
    batch_header header;
    merkle::merkle_proof proof;
    crypto::quorum_certificate cert; // f+1 over header.claim_digest()
};

struct unsatisfied_dependency {
    partition_id partition = 0;
    batch_id required_prepare_batch = no_batch;

    friend bool operator==(const unsatisfied_dependency&, const unsatisfied_dependency&) = default;
};

/// Every response's vector entry for another read partition must not exceed
/// that partition's LCE. Returns the largest requirement per partition.
std::vector<unsatisfied_dependency> verify_dependencies(std::span<const batch_header> headers);

bool check_freshness(const batch_header& header, sim_time client_clock, sim_time delta);

/// Refusal from a replica whose partition has not certified a batch yet.
/// Transient, so clients wait and ask again instead of giving up.
inline constexpr std::string_view not_ready = "no certified snapshot yet";

/// Certificate, inclusion proof, and that the proof covers exactly `keys`.
bool verify_response(const ro_response& response,
                     std::span<const std::string> keys,
                     const merkle::key_universe& universe,
                     const crypto::key_registry& registry,
                     std::span<const node_id> members,
                     std::uint32_t threshold);

} // namespace transedge::readonly
