#pragma once

#include "transedge/messages.hpp"
#include "transedge/topology.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <queue>
#include <random>
#include <span>
#include <unordered_map>
#include <vector>

namespace transedge::net {

struct latency_range {
    sim_time min = 1;
    sim_time max = 1;
};

struct net_config {
    std::uint64_t seed = 1;
    latency_range intra{1, 2};   // replicas of one cluster
    latency_range inter{5, 10};  // between clusters, and between clients and clusters
    sim_time extra_inter = 0;    // added to every inter-cluster hop
    double drop_rate = 0.0;
    double dup_rate = 0.0;
    sim_time max_clock_skew = 0; // each node draws a fixed skew in [-max, max]
};

struct envelope {
    node_id from = -1;
    node_id to = -1;
    sim_time sent_at = 0;
    sim_time deliver_at = 0;
    std::uint64_t seq = 0;
    msg::payload payload;
};

using handler = std::function<void(const envelope&)>;

struct run_result {
    sim_time time = 0;
    bool condition_met = false;
    std::uint64_t events = 0;
};

using message_counts = std::array<std::uint64_t, msg::category_count>;

/// Deterministic discrete-event network. Events are delivered in
/// (deliver_at, seq) order; handlers run synchronously inside run_until.
class network {
public:
    network(const topology& topo, std::int32_t nodes, net_config config);

    void attach(node_id n, handler h);

    sim_time now() const { return now_; }
    /// The node's local clock: simulated time plus its fixed skew.
    sim_time clock(node_id n) const { return now_ + skew_.at(static_cast<std::size_t>(n)); }
    sim_time skew(node_id n) const { return skew_.at(static_cast<std::size_t>(n)); }

    /// Schedules delivery after a sampled link latency. `txns` lists the
    /// transactions the message carries, for per-transaction accounting.
    void send(node_id from, node_id to, msg::payload payload, msg::category cat, std::span<const txn_id> txns = {});
    void send_after(sim_time delay, node_id from, node_id to, msg::payload payload, msg::category cat,
                    std::span<const txn_id> txns = {});
    void set_timer(node_id n, sim_time delay, msg::timer t);

    /// Silently discards everything the node sends from now on.
    void mute(node_id n) { muted_.at(static_cast<std::size_t>(n)) = true; }

    run_result run_until(const std::function<bool()>& done, sim_time horizon);
    bool idle() const { return queue_.empty(); }

    sim_time link_latency(node_id from, node_id to);
    bool same_cluster(node_id a, node_id b) const;

    const std::unordered_map<txn_id, message_counts>& per_txn() const { return per_txn_; }
    const message_counts& totals() const { return totals_; }
    std::mt19937_64& rng() { return rng_; }
    double uniform01();

private:
    struct later {
        bool operator()(const envelope& a, const envelope& b) const
        {
            return a.deliver_at != b.deliver_at ? a.deliver_at > b.deliver_at : a.seq > b.seq;
        }
    };

    void push(envelope e);

    const topology& topo_;
    net_config config_;
    std::mt19937_64 rng_;
    sim_time now_ = 0;
    std::uint64_t seq_ = 0;
    std::priority_queue<envelope, std::vector<envelope>, later> queue_;
    std::vector<handler> handlers_;
    std::vector<sim_time> skew_;
    std::vector<bool> muted_;
    std::unordered_map<txn_id, message_counts> per_txn_;
    message_counts totals_{};
};

} // namespace transedge::net
