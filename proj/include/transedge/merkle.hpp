#pragma once

#include "transedge/crypto.hpp"
#include "transedge/records.hpp"

#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace transedge::merkle {

using crypto::digest;

class version_regression : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class unknown_batch : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

class key_not_in_universe : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// The sorted set of keys a partition can ever hold. Every key has a fixed
/// leaf position, which is what makes roots canonical and lets a verifier
/// check that a proof sits at the right place (non-membership included).
class key_universe {
public:
    explicit key_universe(std::vector<std::string> keys);

    std::size_t size() const { return keys_.size(); }
    std::size_t width() const { return width_; }
    unsigned depth() const { return depth_; }
    std::optional<std::size_t> position(const std::string& key) const;
    const std::string& key_at(std::size_t pos) const { return keys_[pos]; }

private:
    std::vector<std::string> keys_;
    std::unordered_map<std::string, std::size_t> index_;
    std::size_t width_ = 1;
    unsigned depth_ = 0;
};

digest empty_leaf_hash();
digest leaf_hash(const std::string& key, const std::string& value, batch_id version);
digest interior_hash(const digest& left, const digest& right);

struct proof_entry {
    std::string key;
    std::string value;
    batch_id version = no_batch;
    bool present = false; // false: non-membership, the leaf is empty
    std::uint64_t position = 0;
    std::vector<digest> siblings; // leaf level first

    friend bool operator==(const proof_entry&, const proof_entry&) = default;
};

struct merkle_proof {
    std::vector<proof_entry> entries;
    digest root{};
    batch_id root_batch = no_batch;

    friend bool operator==(const merkle_proof&, const merkle_proof&) = default;
};

struct leaf_value {
    std::string value;
    batch_id version = no_batch;
    bool present = false;
};

/// Persistent (path-copying) Merkle tree over a fixed key universe. Every
/// applied version keeps its root, so proofs at older batches stay valid.
class merkle_store {
public:
    explicit merkle_store(std::shared_ptr<const key_universe> universe);

    /// Records a new root under `version`. Versions must strictly increase.
    digest apply_writes(std::span<const write_entry> writes, batch_id version);

    /// Drops the newest version (used when a sealed batch fails agreement).
    void rollback_latest();

    digest root_at(batch_id version) const;
    digest latest_root() const;
    batch_id latest_version() const;
    bool has_version(batch_id version) const;
    leaf_value get(const std::string& key, batch_id version) const;

    merkle_proof prove(std::span<const std::string> keys, batch_id at_batch) const;

    const key_universe& universe() const { return *universe_; }
    std::shared_ptr<const key_universe> universe_ptr() const { return universe_; }

    /// Root of a tree built from scratch over the given leaves.
    static digest rebuild_root(const key_universe& universe,
                               const std::vector<std::pair<std::string, leaf_value>>& leaves);

private:
    using node_ref = std::uint32_t;
    struct node {
        digest hash{};
        node_ref left = 0;
        node_ref right = 0;
        std::int32_t leaf = -1; // index into leaves_ for occupied leaves
    };
    struct pending_write {
        std::size_t position;
        const write_entry* entry;
    };

    node_ref update(node_ref at, unsigned level, std::uint64_t base,
                    std::span<const pending_write> writes, batch_id version);
    node_ref root_ref(batch_id version) const;

    std::shared_ptr<const key_universe> universe_;
    std::vector<node> nodes_;
    std::vector<leaf_value> leaves_;
    std::vector<node_ref> empty_; // empty subtree per level, 0 = leaf level
    std::vector<std::pair<batch_id, node_ref>> history_;
};

/// Recomputes each entry's path and checks it lands on proof.root.
bool verify_inclusion(const merkle_proof& proof, const key_universe& universe);

/// Full client-side check: inclusion, the header claim binds (root, batch),
/// and the certificate carries `threshold` valid signatures from `members`
/// over the claim.
bool verify_proof(const merkle_proof& proof,
                  const key_universe& universe,
                  const batch_header& claim,
                  const crypto::quorum_certificate& cert,
                  const crypto::key_registry& keys,
                  std::span<const node_id> members,
                  std::uint32_t threshold);

} // namespace transedge::merkle
