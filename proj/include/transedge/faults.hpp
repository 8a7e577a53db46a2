#pragma once

#include "transedge/topology.hpp"

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace transedge::faults {

enum class behavior : std::uint8_t { honest, equivocate, stale_responder, bad_cd_vector, forged_proof, mute, forge_sig };

std::string_view to_string(behavior b);

class unsupported_behavior : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

behavior behavior_from_string(std::string_view s);

struct fault_spec {
    node_id node = -1;
    behavior what = behavior::honest;
    std::map<std::string, std::string> params;

    double param(const std::string& name, double fallback) const;
    friend bool operator==(const fault_spec&, const fault_spec&) = default;
};

/// `node:behavior[:key=value]...`, comma separated. Empty text gives no faults.
std::vector<fault_spec> parse(std::string_view text);
std::string format(const std::vector<fault_spec>& specs);

class too_many_faults : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Who misbehaves, and how, in one deployment.
class fault_plan {
public:
    fault_plan() = default;
    /// Throws too_many_faults if a cluster gets more than f faulty replicas
    /// and `unsafe` is false, or for unknown/non-replica nodes.
    fault_plan(const topology& topo, std::vector<fault_spec> specs, bool unsafe);

    const fault_spec* find(node_id n) const;
    behavior of(node_id n) const;
    bool honest(node_id n) const { return of(n) == behavior::honest; }
    const std::vector<fault_spec>& specs() const { return specs_; }
    /// Replicas of the partition running `equivocate` (leader included).
    std::vector<node_id> colluders(const topology& topo, partition_id p) const;

private:
    std::vector<fault_spec> specs_;
    std::map<node_id, std::size_t> by_node_;
};

/// Draws at most `per_cluster` faulty replicas per cluster from the
/// catalogue. Leaders never get `mute` (there is no view change).
std::vector<fault_spec> random_plan(const topology& topo, std::uint64_t seed, std::int32_t per_cluster);

} // namespace transedge::faults
