#pragma once

#include "transedge/types.hpp"

#include <span>
#include <stdexcept>
#include <vector>

namespace transedge {

/// Cluster membership for a whole deployment: partition p is served by
/// 3f+1 replicas, the first of which leads. Clients get ids after all replicas.
class topology {
public:
    topology(std::int32_t partitions, std::int32_t f);

    std::int32_t partitions() const { return partitions_; }
    std::int32_t f() const { return f_; }
    std::int32_t cluster_size() const { return 3 * f_ + 1; }
    std::uint32_t reply_threshold() const { return static_cast<std::uint32_t>(f_ + 1); }
    std::uint32_t agree_threshold() const { return static_cast<std::uint32_t>(2 * f_ + 1); }

    std::span<const node_id> members(partition_id p) const { return members_.at(static_cast<std::size_t>(p)); }
    node_id leader(partition_id p) const { return members(p).front(); }
    node_id replica(partition_id p, std::int32_t i) const { return members(p)[static_cast<std::size_t>(i)]; }
    bool is_replica(node_id n) const { return n >= 0 && n < partitions_ * cluster_size(); }
    partition_id partition_of(node_id n) const;
    std::int32_t replica_index(node_id n) const { return n % cluster_size(); }
    node_id first_client_id() const { return partitions_ * cluster_size(); }

private:
    std::int32_t partitions_;
    std::int32_t f_;
    std::vector<std::vector<node_id>> members_;
};

inline topology::topology(std::int32_t partitions, std::int32_t f) : partitions_(partitions), f_(f)
{
    if (partitions < 1 || f < 0) throw std::invalid_argument("bad topology");
    for (partition_id p = 0; p < partitions; ++p) {
        std::vector<node_id> m;
        for (std::int32_t i = 0; i < cluster_size(); ++i) m.push_back(p * cluster_size() + i);
        members_.push_back(std::move(m));
    }
}

inline partition_id topology::partition_of(node_id n) const
{
    if (!is_replica(n)) throw std::out_of_range("node is not a replica");
    return n / cluster_size();
}

} // namespace transedge
