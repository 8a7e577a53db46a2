#include "transedge/net.hpp"

#include <stdexcept>

namespace transedge::msg {

std::string_view to_string(category c)
{
    switch (c) {
    case category::consensus: return "consensus";
    case category::twopc: return "twopc";
    case category::client: return "client";
    case category::ro: return "ro";
    case category::timer: return "timer";
    }
    return "?";
}

} // namespace transedge::msg

namespace transedge::net {

namespace {

sim_time sample(std::mt19937_64& rng, latency_range r)
{
    if (r.max <= r.min) return r.min;
    return r.min + static_cast<sim_time>(rng() % static_cast<std::uint64_t>(r.max - r.min + 1));
}

} // namespace

network::network(const topology& topo, std::int32_t nodes, net_config config)
    : topo_(topo), config_(config), rng_(config.seed), handlers_(static_cast<std::size_t>(nodes)),
      skew_(static_cast<std::size_t>(nodes), 0), muted_(static_cast<std::size_t>(nodes), false)
{
    if (config_.max_clock_skew > 0) {
        for (auto& s : skew_) s = sample(rng_, {-config_.max_clock_skew, config_.max_clock_skew});
    }
}

void network::attach(node_id n, handler h)
{
    handlers_.at(static_cast<std::size_t>(n)) = std::move(h);
}

double network::uniform01()
{
    return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
}

bool network::same_cluster(node_id a, node_id b) const
{
    return topo_.is_replica(a) && topo_.is_replica(b) && topo_.partition_of(a) == topo_.partition_of(b);
}

sim_time network::link_latency(node_id from, node_id to)
{
    if (from == to) return 0;
    if (same_cluster(from, to)) return sample(rng_, config_.intra);
    return sample(rng_, config_.inter) + config_.extra_inter;
}

void network::push(envelope e)
{
    e.seq = seq_++;
    queue_.push(std::move(e));
}

void network::send(node_id from, node_id to, msg::payload payload, msg::category cat, std::span<const txn_id> txns)
{
    send_after(0, from, to, std::move(payload), cat, txns);
}

void network::send_after(sim_time delay, node_id from, node_id to, msg::payload payload, msg::category cat,
                         std::span<const txn_id> txns)
{
    if (muted_.at(static_cast<std::size_t>(from))) return;
    auto c = static_cast<std::size_t>(cat);
    if (c < msg::category_count) {
        ++totals_[c];
        for (auto t : txns) ++per_txn_[t][c];
    }
    if (config_.drop_rate > 0 && uniform01() < config_.drop_rate) return;
    int copies = 1;
    if (config_.dup_rate > 0 && uniform01() < config_.dup_rate) copies = 2;
    for (int i = 0; i < copies; ++i) {
        envelope e;
        e.from = from;
        e.to = to;
        e.sent_at = now_;
        e.deliver_at = now_ + delay + link_latency(from, to);
        e.payload = payload;
        push(std::move(e));
    }
}

void network::set_timer(node_id n, sim_time delay, msg::timer t)
{
    envelope e;
    e.from = n;
    e.to = n;
    e.sent_at = now_;
    e.deliver_at = now_ + std::max<sim_time>(delay, 0);
    e.payload = t;
    push(std::move(e));
}

run_result network::run_until(const std::function<bool()>& done, sim_time horizon)
{
    run_result r;
    while (true) {
        if (done && done()) {
            r.condition_met = true;
            break;
        }
        if (queue_.empty() || queue_.top().deliver_at > horizon) break;
        envelope e = queue_.top();
        queue_.pop();
        now_ = e.deliver_at;
        ++r.events;
        auto& h = handlers_.at(static_cast<std::size_t>(e.to));
        if (h) h(e);
    }
    r.time = now_;
    return r;
}

} // namespace transedge::net
