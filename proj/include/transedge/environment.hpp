#pragma once

#include "transedge/crypto.hpp"
#include "transedge/faults.hpp"
#include "transedge/merkle.hpp"
#include "transedge/net.hpp"
#include "transedge/topology.hpp"
#include "transedge/trace.hpp"

#include <memory>
#include <vector>

namespace transedge {

/// Protocol timing knobs, all in simulated milliseconds.
struct protocol_params {
    sim_time batch_interval = 10;   // leader seal timer
    std::size_t max_batch_txns = 256;
    sim_time heartbeat = 500;       // seal an empty batch at least this often
    sim_time agreement_timeout = 400;
    sim_time equivocation_flush = 20;
    sim_time forward_timeout = 1500; // backups forward held requests after this
    sim_time dep_wait = 3000;       // second-round server wait
    sim_time delta = 30000;         // freshness window
};

/// What every simulated node shares: membership, keys, the network and the trace.
struct environment {
    topology topo;
    std::shared_ptr<const crypto::signature_scheme> scheme;
    crypto::key_registry registry;
    std::vector<crypto::node_key_pair> keys; // replicas, indexed by node id
    key_partitioner partitioner;
    std::vector<std::shared_ptr<const merkle::key_universe>> universes;
    protocol_params params;
    faults::fault_plan faults;
    net::network* network = nullptr;
    trace::trace_log* trace = nullptr;

    environment(topology t, std::shared_ptr<const crypto::signature_scheme> s)
        : topo(t), scheme(s), registry(s), partitioner(t.partitions())
    {
    }

    const merkle::key_universe& universe(partition_id p) const { return *universes.at(static_cast<std::size_t>(p)); }
    /// The leader plus f backups: the receivers of any cross-cluster request.
    std::vector<node_id> fan_out(partition_id p) const
    {
        std::vector<node_id> out;
        for (std::int32_t i = 0; i <= topo.f(); ++i) out.push_back(topo.replica(p, i));
        return out;
    }
};

} // namespace transedge
