#include "transedge/simulation.hpp"

#include "transedge/client.hpp"
#include "transedge/consensus.hpp"

#include <algorithm>
#include <charconv>
#include <memory>

namespace transedge {

namespace {

using workload::config_map;
using workload::invalid_config;

template <class T>
void take(config_map& m, const std::string& key, T& out)
{
    auto it = m.find(key);
    if (it == m.end()) return;
    const auto& text = it->second;
    if constexpr (std::is_same_v<T, std::string>) {
        out = text;
    } else if constexpr (std::is_same_v<T, bool>) {
        if (text == "1" || text == "true" || text == "yes") out = true;
        else if (text == "0" || text == "false" || text == "no") out = false;
        else throw invalid_config("bad value for " + key + ": " + text);
    } else {
        T v{};
        auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc{} || p != text.data() + text.size()) throw invalid_config("bad value for " + key + ": " + text);
        out = v;
    }
    m.erase(it);
}

std::string num(double v)
{
    auto s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

} // namespace

void sim_config::apply(config_map m)
{
    workload.apply(m);
    take(m, "seed", seed);
    take(m, "n_clients", n_clients);
    take(m, "ro_mode", ro_mode);
    take(m, "mutant", mutant);
    take(m, "scheme", scheme);
    take(m, "faults", faults);
    take(m, "unsafe_faults", unsafe_faults);
    take(m, "ro_timeout", ro_timeout);
    take(m, "start_at", start_at);
    take(m, "settle", settle);
    take(m, "horizon", horizon);
    take(m, "intra_min", net.intra.min);
    take(m, "intra_max", net.intra.max);
    take(m, "inter_min", net.inter.min);
    take(m, "inter_max", net.inter.max);
    take(m, "extra_inter", net.extra_inter);
    take(m, "latency", net.extra_inter);
    take(m, "drop_rate", net.drop_rate);
    take(m, "dup_rate", net.dup_rate);
    take(m, "max_clock_skew", net.max_clock_skew);
    take(m, "batch_interval", protocol.batch_interval);
    take(m, "max_batch_txns", protocol.max_batch_txns);
    take(m, "heartbeat", protocol.heartbeat);
    take(m, "agreement_timeout", protocol.agreement_timeout);
    take(m, "equivocation_flush", protocol.equivocation_flush);
    take(m, "forward_timeout", protocol.forward_timeout);
    take(m, "dep_wait", protocol.dep_wait);
    take(m, "delta", protocol.delta);
    if (!m.empty()) throw invalid_config("unknown config key: " + m.begin()->first);
}

void sim_config::validate() const
{
    workload.validate();
    if (n_clients < 1) throw invalid_config("n_clients must be positive");
    if (ro_mode != "transedge" && ro_mode != "twopc") throw invalid_config("ro_mode must be transedge or twopc");
    if (net.intra.min < 0 || net.intra.max < net.intra.min || net.inter.min < 0 || net.inter.max < net.inter.min ||
        net.extra_inter < 0) {
        throw invalid_config("bad latency range");
    }
    if (net.drop_rate < 0 || net.drop_rate > 1 || net.dup_rate < 0 || net.dup_rate > 1) {
        throw invalid_config("drop_rate and dup_rate must lie in [0,1]");
    }
    // Two honest clocks may differ by twice the skew bound.
    if (protocol.delta <= 2 * net.max_clock_skew) throw invalid_config("delta must exceed twice max_clock_skew");
    if (protocol.batch_interval < 1 || protocol.max_batch_txns < 1) throw invalid_config("bad batching parameters");
    crypto::make_scheme(scheme);
}

config_map sim_config::to_map() const
{
    config_map m;
    m["n_partitions"] = std::to_string(workload.n_partitions);
    m["f"] = std::to_string(workload.f);
    m["n_keys"] = std::to_string(workload.n_keys);
    m["key_size"] = std::to_string(workload.key_size);
    m["value_size"] = std::to_string(workload.value_size);
    m["n_txns"] = std::to_string(workload.n_txns);
    m["mix"] = num(workload.mix.local_rw) + "," + num(workload.mix.dist_rw) + "," + num(workload.mix.read_only) + "," +
               num(workload.mix.write_only);
    m["reads_per_txn"] = std::to_string(workload.reads_per_txn);
    m["writes_per_txn"] = std::to_string(workload.writes_per_txn);
    m["ro_keys_per_txn"] = std::to_string(workload.ro_keys_per_txn);
    m["ro_partitions_per_txn"] = std::to_string(workload.ro_partitions_per_txn);
    m["key_distribution"] = workload.key_distribution;
    m["seed"] = std::to_string(seed);
    m["n_clients"] = std::to_string(n_clients);
    m["ro_mode"] = ro_mode;
    m["mutant"] = mutant ? "true" : "false";
    m["scheme"] = scheme;
    m["faults"] = faults;
    m["unsafe_faults"] = unsafe_faults ? "true" : "false";
    m["ro_timeout"] = std::to_string(ro_timeout);
    m["start_at"] = std::to_string(start_at);
    m["settle"] = std::to_string(settle);
    m["horizon"] = std::to_string(horizon);
    m["intra_min"] = std::to_string(net.intra.min);
    m["intra_max"] = std::to_string(net.intra.max);
    m["inter_min"] = std::to_string(net.inter.min);
    m["inter_max"] = std::to_string(net.inter.max);
    m["extra_inter"] = std::to_string(net.extra_inter);
    m["drop_rate"] = num(net.drop_rate);
    m["dup_rate"] = num(net.dup_rate);
    m["max_clock_skew"] = std::to_string(net.max_clock_skew);
    m["batch_interval"] = std::to_string(protocol.batch_interval);
    m["max_batch_txns"] = std::to_string(protocol.max_batch_txns);
    m["heartbeat"] = std::to_string(protocol.heartbeat);
    m["agreement_timeout"] = std::to_string(protocol.agreement_timeout);
    m["equivocation_flush"] = std::to_string(protocol.equivocation_flush);
    m["forward_timeout"] = std::to_string(protocol.forward_timeout);
    m["dep_wait"] = std::to_string(protocol.dep_wait);
    m["delta"] = std::to_string(protocol.delta);
    return m;
}

std::string resolve_faults(const sim_config& config)
{
    if (config.faults != "random") return config.faults;
    topology topo(config.workload.n_partitions, config.workload.f);
    return faults::format(faults::random_plan(topo, config.seed, config.workload.f));
}

sim_result simulate(const sim_config& config, const std::vector<scripted_txn>* script)
{
    config.validate();
    topology topo(config.workload.n_partitions, config.workload.f);
    environment env(topo, crypto::make_scheme(config.scheme));
    env.params = config.protocol;

    auto fault_text = resolve_faults(config);
    env.faults = faults::fault_plan(topo, faults::parse(fault_text), config.unsafe_faults);

    const auto n_replicas = topo.partitions() * topo.cluster_size();
    for (node_id n = 0; n < n_replicas; ++n) {
        auto seed = crypto::sha256("transedge-node-key:" + std::to_string(config.seed) + ":" + std::to_string(n));
        env.keys.push_back(env.scheme->generate(n, seed));
        env.registry.add(n, env.keys.back().pub);
    }

    workload::keyspace keys(config.workload.n_keys, config.workload.key_size, env.partitioner);
    for (partition_id p = 0; p < topo.partitions(); ++p) {
        env.universes.push_back(std::make_shared<const merkle::key_universe>(keys.on(p)));
    }

    trace::header h;
    h.partitions = topo.partitions();
    h.f = topo.f();
    h.seed = config.seed;
    h.faults = fault_text;
    for (const auto& s : env.faults.specs()) h.faulty.push_back(s.node);
    std::sort(h.faulty.begin(), h.faulty.end());
    h.unsafe = config.unsafe_faults;
    h.ro_mode = config.ro_mode;
    h.delta = config.protocol.delta;
    h.config = config.to_map();
    h.config["faults"] = fault_text;
    trace::trace_log log(std::move(h));
    env.trace = &log;

    auto netcfg = config.net;
    netcfg.seed = config.seed ^ 0x9e3779b97f4a7c15ULL;
    const auto n_nodes = n_replicas + config.n_clients;
    net::network network(topo, n_nodes, netcfg);
    env.network = &network;

    std::vector<std::unique_ptr<replica>> replicas;
    for (node_id n = 0; n < n_replicas; ++n) {
        replicas.push_back(std::make_unique<replica>(env, n));
        network.attach(n, [r = replicas.back().get()](const net::envelope& e) { r->on_message(e); });
    }
    // The read-only timeout is slack on top of the slowest client round trip,
    // so raising inter-cluster latency does not turn every query into a retry.
    sim_time worst_rtt = 2 * (config.net.inter.max + config.net.extra_inter);
    client_options opts{config.ro_mode, config.mutant, config.ro_timeout + worst_rtt};
    std::vector<std::unique_ptr<client>> clients;
    for (std::int32_t i = 0; i < config.n_clients; ++i) {
        node_id id = topo.first_client_id() + i;
        clients.push_back(std::make_unique<client>(env, id, opts));
        network.attach(id, [c = clients.back().get()](const net::envelope& e) { c->on_message(e); });
    }

    if (script) {
        for (const auto& s : *script) {
            clients.at(static_cast<std::size_t>(s.client))->enqueue(s.txn, s.at);
        }
    } else {
        auto txns = workload::generate(config.workload, keys, config.seed);
        for (std::size_t i = 0; i < txns.size(); ++i) {
            clients[i % clients.size()]->enqueue(std::move(txns[i]), config.start_at);
        }
    }

    for (auto& r : replicas) r->start();
    for (auto& c : clients) c->start();

    auto all_idle = [&] { return std::all_of(clients.begin(), clients.end(), [](const auto& c) { return c->idle(); }); };
    auto first = network.run_until(all_idle, config.horizon);
    auto second = network.run_until([] { return false; }, std::min(config.horizon, network.now() + config.settle));

    std::vector<std::pair<txn_id, net::message_counts>> counts(network.per_txn().begin(), network.per_txn().end());
    std::sort(counts.begin(), counts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [t, c] : counts) {
        trace::messages m;
        m.txn = t;
        std::copy(c.begin(), c.end(), m.counts.begin());
        log.add(m);
    }
    sim_result out;
    out.completed = first.condition_met;
    out.end = network.now();
    out.events = first.events + second.events;
    log.add(trace::run_end{out.end, out.completed, out.events});
    env.trace = nullptr;
    out.trace = std::move(log);
    return out;
}

} // namespace transedge
