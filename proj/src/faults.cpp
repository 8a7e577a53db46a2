#include "transedge/faults.hpp"

#include <algorithm>
#include <charconv>
#include <random>
#include <sstream>

namespace transedge::faults {

namespace {

constexpr std::pair<behavior, std::string_view> names[] = {
    {behavior::honest, "honest"},
    {behavior::equivocate, "equivocate"},
    {behavior::stale_responder, "stale_responder"},
    {behavior::bad_cd_vector, "bad_cd_vector"},
    {behavior::forged_proof, "forged_proof"},
    {behavior::mute, "mute"},
    {behavior::forge_sig, "forge_sig"},
};

std::vector<std::string> split(std::string_view s, char sep)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto end = s.find(sep, start);
        if (end == std::string_view::npos) end = s.size();
        out.emplace_back(s.substr(start, end - start));
        start = end + 1;
    }
    return out;
}

std::string trim(std::string s)
{
    auto b = s.find_first_not_of(" \t");
    auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

} // namespace

std::string_view to_string(behavior b)
{
    for (const auto& [v, n] : names) {
        if (v == b) return n;
    }
    return "?";
}

behavior behavior_from_string(std::string_view s)
{
    for (const auto& [v, n] : names) {
        if (n == s) return v;
    }
    throw unsupported_behavior("unsupported behavior: " + std::string(s));
}

double fault_spec::param(const std::string& name, double fallback) const
{
    auto it = params.find(name);
    if (it == params.end()) return fallback;
    return std::stod(it->second);
}

std::vector<fault_spec> parse(std::string_view text)
{
    std::vector<fault_spec> out;
    if (trim(std::string(text)).empty()) return out;
    for (auto item : split(text, ',')) {
        item = trim(item);
        auto parts = split(item, ':');
        if (parts.size() < 2) throw std::invalid_argument("fault entry needs node:behavior: " + item);
        fault_spec f;
        auto node = trim(parts[0]);
        auto [p, ec] = std::from_chars(node.data(), node.data() + node.size(), f.node);
        if (ec != std::errc{} || p != node.data() + node.size()) throw std::invalid_argument("bad node id: " + node);
        f.what = behavior_from_string(trim(parts[1]));
        for (std::size_t i = 2; i < parts.size(); ++i) {
            auto eq = parts[i].find('=');
            if (eq == std::string::npos) throw std::invalid_argument("fault parameter needs key=value: " + parts[i]);
            f.params[trim(parts[i].substr(0, eq))] = trim(parts[i].substr(eq + 1));
        }
        out.push_back(std::move(f));
    }
    return out;
}

std::string format(const std::vector<fault_spec>& specs)
{
    std::ostringstream os;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        if (i) os << ',';
        os << specs[i].node << ':' << to_string(specs[i].what);
        for (const auto& [k, v] : specs[i].params) os << ':' << k << '=' << v;
    }
    return os.str();
}

fault_plan::fault_plan(const topology& topo, std::vector<fault_spec> specs, bool unsafe) : specs_(std::move(specs))
{
    std::map<partition_id, std::int32_t> per_cluster;
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        const auto& f = specs_[i];
        if (!topo.is_replica(f.node)) throw std::invalid_argument("fault target is not a replica: " + std::to_string(f.node));
        if (!by_node_.emplace(f.node, i).second) throw std::invalid_argument("node listed twice: " + std::to_string(f.node));
        if (f.what != behavior::honest) ++per_cluster[topo.partition_of(f.node)];
    }
    if (!unsafe) {
        for (const auto& [p, n] : per_cluster) {
            if (n > topo.f()) {
                throw too_many_faults("cluster " + std::to_string(p) + " has " + std::to_string(n) +
                                      " faulty replicas, more than f = " + std::to_string(topo.f()));
            }
        }
    }
}

const fault_spec* fault_plan::find(node_id n) const
{
    auto it = by_node_.find(n);
    return it == by_node_.end() ? nullptr : &specs_[it->second];
}

behavior fault_plan::of(node_id n) const
{
    const auto* f = find(n);
    return f ? f->what : behavior::honest;
}

std::vector<node_id> fault_plan::colluders(const topology& topo, partition_id p) const
{
    std::vector<node_id> out;
    for (auto n : topo.members(p)) {
        if (of(n) == behavior::equivocate) out.push_back(n);
    }
    return out;
}

std::vector<fault_spec> random_plan(const topology& topo, std::uint64_t seed, std::int32_t per_cluster)
{
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    const behavior catalogue[] = {behavior::equivocate, behavior::stale_responder, behavior::bad_cd_vector,
                                  behavior::forged_proof, behavior::mute, behavior::forge_sig};
    std::vector<fault_spec> out;
    for (partition_id p = 0; p < topo.partitions(); ++p) {
        std::vector<std::int32_t> slots(static_cast<std::size_t>(topo.cluster_size()));
        for (std::int32_t i = 0; i < topo.cluster_size(); ++i) slots[static_cast<std::size_t>(i)] = i;
        auto count = static_cast<std::int32_t>(rng() % static_cast<std::uint64_t>(per_cluster + 1));
        for (std::int32_t k = 0; k < count; ++k) {
            auto pick = static_cast<std::size_t>(rng() % slots.size());
            auto idx = slots[pick];
            slots.erase(slots.begin() + static_cast<std::ptrdiff_t>(pick));
            fault_spec f;
            f.node = topo.replica(p, idx);
            do {
                f.what = catalogue[rng() % std::size(catalogue)];
            } while (idx == 0 && f.what == behavior::mute);
            if (f.what == behavior::bad_cd_vector) f.params["rate"] = "0.3";
            if (f.what == behavior::stale_responder) f.params["lag"] = std::to_string(1 + rng() % 8);
            out.push_back(std::move(f));
        }
    }
    return out;
}

} // namespace transedge::faults
