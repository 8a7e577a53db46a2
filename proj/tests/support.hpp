#pragma once

#include "transedge/crypto.hpp"
#include "transedge/ledger.hpp"
#include "transedge/merkle.hpp"
#include "transedge/topology.hpp"

#include <memory>
#include <string>
#include <vector>

namespace transedge::testing {

/// Keys, universes and signing helpers for tests that drive ledgers by hand.
struct deployment {
    topology topo;
    std::shared_ptr<const crypto::signature_scheme> scheme = crypto::make_scheme("keyed-hash");
    crypto::key_registry registry{scheme};
    std::vector<crypto::node_key_pair> keys;
    key_partitioner partitioner;
    std::vector<std::shared_ptr<const merkle::key_universe>> universes;

    deployment(std::int32_t partitions, std::int32_t f, int n_keys = 512)
        : topo(partitions, f), partitioner(partitions)
    {
        for (node_id n = 0; n < partitions * topo.cluster_size(); ++n) {
            keys.push_back(scheme->generate(n, crypto::sha256("test-node-" + std::to_string(n))));
            registry.add(n, keys.back().pub);
        }
        std::vector<std::vector<std::string>> per(static_cast<std::size_t>(partitions));
        for (int i = 0; i < n_keys; ++i) {
            auto k = "k" + std::to_string(i);
            per[static_cast<std::size_t>(partitioner(k))].push_back(k);
        }
        for (auto& v : per) universes.push_back(std::make_shared<merkle::key_universe>(v));
    }

    ledger::ledger_config config(partition_id p) const
    {
        return ledger::ledger_config{p, topo.partitions(), partitioner, universes[static_cast<std::size_t>(p)]};
    }

    /// The i-th key (in universe order) owned by partition p.
    std::string key_on(partition_id p, std::size_t i) const { return universes[static_cast<std::size_t>(p)]->key_at(i); }

    crypto::quorum_certificate certify(partition_id p, const crypto::digest& what, std::uint32_t signers) const
    {
        std::vector<crypto::signature> sigs;
        for (std::uint32_t i = 0; i < signers; ++i) {
            auto n = topo.replica(p, static_cast<std::int32_t>(i));
            sigs.push_back(crypto::sign(*scheme, keys[static_cast<std::size_t>(n)], what));
        }
        return crypto::quorum_certificate{what, sigs, signers};
    }

    crypto::quorum_certificate reply_cert(partition_id p, const crypto::digest& what) const
    {
        return certify(p, what, topo.reply_threshold());
    }

    crypto::quorum_certificate agree_cert(partition_id p, const crypto::digest& what) const
    {
        return certify(p, what, topo.agree_threshold());
    }

    ledger::validation_context context(sim_time now) const
    {
        return ledger::validation_context{&topo, &registry, now, 30000};
    }
};

inline transaction make_txn(txn_id id, txn_kind kind, std::vector<read_entry> reads, std::vector<write_entry> writes,
                            const key_partitioner& part)
{
    transaction t;
    t.id = id;
    t.kind = kind;
    t.read_set = std::move(reads);
    t.write_set = std::move(writes);
    t.partitions = partitions_of(t, part);
    return t;
}

} // namespace transedge::testing
