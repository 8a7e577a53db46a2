#include "transedge/workload.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace transedge::workload {

namespace {

std::string trim(std::string_view s)
{
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string_view::npos ? std::string{} : std::string(s.substr(b, e - b + 1));
}

template <class T>
T number(const std::string& key, const std::string& text)
{
    T v{};
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || p != text.data() + text.size()) throw invalid_config("bad value for " + key + ": " + text);
    return v;
}

template <class T>
void take(config_map& m, const std::string& key, T& out)
{
    auto it = m.find(key);
    if (it == m.end()) return;
    if constexpr (std::is_same_v<T, std::string>) {
        out = it->second;
    } else {
        out = number<T>(key, it->second);
    }
    m.erase(it);
}

// Uniform index in [0, n) without the implementation-defined distributions.
std::size_t pick(std::mt19937_64& rng, std::size_t n)
{
    return static_cast<std::size_t>(rng() % n);
}

} // namespace

config_map parse_config(std::string_view text)
{
    config_map out;
    std::istringstream in{std::string(text)};
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        auto t = trim(line);
        if (t.empty()) continue;
        auto eq = t.find('=');
        if (eq == std::string::npos) throw invalid_config("line " + std::to_string(n) + ": expected key=value");
        auto key = trim(std::string_view(t).substr(0, eq));
        if (key.empty()) throw invalid_config("line " + std::to_string(n) + ": empty key");
        out[key] = trim(std::string_view(t).substr(eq + 1));
    }
    return out;
}

config_map load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw invalid_config("cannot read config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string_view to_string(txn_class c)
{
    switch (c) {
    case txn_class::local_rw: return "local_rw";
    case txn_class::dist_rw: return "dist_rw";
    case txn_class::read_only: return "read_only";
    case txn_class::write_only: return "write_only";
    }
    return "?";
}

void workload_config::apply(config_map& m)
{
    take(m, "n_partitions", n_partitions);
    take(m, "f", f);
    if (auto it = m.find("replicas_per_cluster"); it != m.end()) {
        auto r = number<std::int32_t>(it->first, it->second);
        if (r < 1 || (r - 1) % 3 != 0) throw invalid_config("replicas_per_cluster must be 3f+1");
        f = (r - 1) / 3;
        m.erase(it);
    }
    take(m, "n_keys", n_keys);
    take(m, "key_size", key_size);
    take(m, "value_size", value_size);
    take(m, "n_txns", n_txns);
    take(m, "mix_local_rw", mix.local_rw);
    take(m, "mix_dist_rw", mix.dist_rw);
    take(m, "mix_read_only", mix.read_only);
    take(m, "mix_write_only", mix.write_only);
    if (auto it = m.find("mix"); it != m.end()) {
        // mix = local,dist,ro,write_only
        std::vector<double> v;
        std::stringstream ss(it->second);
        std::string part;
        while (std::getline(ss, part, ',')) v.push_back(number<double>("mix", trim(part)));
        if (v.size() != 4) throw invalid_config("mix needs four comma-separated percentages");
        mix = {v[0], v[1], v[2], v[3]};
        m.erase(it);
    }
    take(m, "reads_per_txn", reads_per_txn);
    take(m, "writes_per_txn", writes_per_txn);
    take(m, "ro_keys_per_txn", ro_keys_per_txn);
    take(m, "ro_partitions_per_txn", ro_partitions_per_txn);
    take(m, "key_distribution", key_distribution);
}

void workload_config::validate() const
{
    auto fail = [](const std::string& why) { throw invalid_config(why); };
    if (n_partitions < 1) fail("n_partitions must be positive");
    if (f < 0) fail("f must be non-negative");
    if (n_keys < n_partitions) fail("n_keys must cover every partition");
    if (key_size < 2 || value_size < 1) fail("key_size >= 2 and value_size >= 1 required");
    if (n_txns < 0) fail("n_txns must be non-negative");
    if (mix.local_rw < 0 || mix.dist_rw < 0 || mix.read_only < 0 || mix.write_only < 0) fail("mix entries must be >= 0");
    if (std::abs(mix.local_rw + mix.dist_rw + mix.read_only + mix.write_only - 100.0) > 1e-9) fail("mix must sum to 100");
    if (mix.dist_rw > 0 && n_partitions < 2) fail("distributed transactions need at least two partitions");
    if (reads_per_txn < 0 || writes_per_txn < 0) fail("operation counts must be >= 0");
    if ((mix.local_rw > 0 || mix.dist_rw > 0) && reads_per_txn + writes_per_txn < 1) fail("read-write transactions need operations");
    if (mix.dist_rw > 0 && reads_per_txn + writes_per_txn < 2) fail("distributed transactions need two operations");
    if (mix.write_only > 0 && writes_per_txn < 1) fail("write-only transactions need writes");
    if (mix.read_only > 0) {
        if (ro_partitions_per_txn < 1 || ro_partitions_per_txn > n_partitions) fail("ro_partitions_per_txn out of range");
        if (ro_keys_per_txn < ro_partitions_per_txn) fail("ro_keys_per_txn must be >= ro_partitions_per_txn");
    }
    if (key_distribution != "uniform-hash") fail("only the uniform-hash key distribution is supported");
}

std::string key_name(std::int32_t i, std::int32_t key_size)
{
    auto digits = std::to_string(i);
    auto width = static_cast<std::size_t>(std::max(key_size - 1, 1));
    if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
    return "k" + digits;
}

keyspace::keyspace(std::int32_t n_keys, std::int32_t key_size, const key_partitioner& partitioner)
    : partitioner_(partitioner), per_(static_cast<std::size_t>(partitioner.partitions()))
{
    for (std::int32_t i = 0; i < n_keys; ++i) {
        auto k = key_name(i, key_size);
        per_[static_cast<std::size_t>(partitioner_(k))].push_back(k);
        all_.push_back(std::move(k));
    }
    for (std::size_t p = 0; p < per_.size(); ++p) {
        if (per_[p].empty()) throw invalid_config("partition " + std::to_string(p) + " owns no keys");
    }
}

namespace {

struct builder {
    const workload_config& cfg;
    const keyspace& keys;
    std::mt19937_64 rng;

    std::string value(txn_id id, std::size_t i) const
    {
        auto v = "v" + std::to_string(id) + "." + std::to_string(i);
        if (v.size() < static_cast<std::size_t>(cfg.value_size)) v.append(static_cast<std::size_t>(cfg.value_size) - v.size(), '.');
        return v;
    }

    std::string any_key() { return keys.all()[pick(rng, keys.all().size())]; }
    std::string key_on(partition_id p)
    {
        const auto& ks = keys.on(p);
        return ks[pick(rng, ks.size())];
    }

    // Draws `n` distinct keys with `draw`, giving up on duplicates after a few tries.
    template <class Draw>
    std::vector<std::string> distinct(std::size_t n, Draw draw, std::set<std::string>& used)
    {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < n; ++i) {
            std::string k;
            for (int tries = 0; tries < 64; ++tries) {
                k = draw(i);
                if (!used.count(k)) break;
            }
            used.insert(k);
            out.push_back(k);
        }
        return out;
    }

    void finish(generated_txn& t)
    {
        std::set<partition_id> ps;
        for (const auto& k : t.reads) ps.insert(keys.partitioner()(k));
        for (const auto& w : t.writes) ps.insert(keys.partitioner()(w.key));
        t.partitions.assign(ps.begin(), ps.end());
        if (t.cls == txn_class::read_only) {
            t.kind = txn_kind::read_only;
        } else {
            t.kind = t.partitions.size() > 1 ? txn_kind::distributed : txn_kind::local;
        }
    }

    generated_txn local(txn_id id)
    {
        generated_txn t;
        t.id = id;
        t.cls = txn_class::local_rw;
        auto home = static_cast<partition_id>(pick(rng, static_cast<std::size_t>(cfg.n_partitions)));
        std::set<std::string> used;
        t.reads = distinct(static_cast<std::size_t>(cfg.reads_per_txn), [&](std::size_t) { return key_on(home); }, used);
        std::set<std::string> wused;
        auto ws = distinct(static_cast<std::size_t>(cfg.writes_per_txn), [&](std::size_t) { return key_on(home); }, wused);
        for (std::size_t i = 0; i < ws.size(); ++i) t.writes.push_back({ws[i], value(id, i)});
        finish(t);
        return t;
    }

    generated_txn distributed(txn_id id)
    {
        generated_txn t;
        t.id = id;
        t.cls = txn_class::dist_rw;
        auto home = static_cast<partition_id>(pick(rng, static_cast<std::size_t>(cfg.n_partitions)));
        auto r = static_cast<std::size_t>(cfg.reads_per_txn);
        auto w = static_cast<std::size_t>(cfg.writes_per_txn);
        // The first operation always lands on the home partition; the rest are uniform.
        std::set<std::string> used;
        t.reads = distinct(r, [&](std::size_t i) { return i == 0 ? key_on(home) : any_key(); }, used);
        std::set<std::string> wused;
        auto ws = distinct(w, [&](std::size_t i) { return (r == 0 && i == 0) ? key_on(home) : any_key(); }, wused);
        for (std::size_t i = 0; i < ws.size(); ++i) t.writes.push_back({ws[i], value(id, i)});
        finish(t);
        if (t.partitions.size() < 2) {
            // Move the last operation to another partition.
            auto other = static_cast<partition_id>((home + 1 + static_cast<partition_id>(pick(rng, static_cast<std::size_t>(cfg.n_partitions - 1)))) %
                                                   cfg.n_partitions);
            if (!t.writes.empty()) {
                t.writes.back().key = key_on(other);
            } else {
                t.reads.back() = key_on(other);
            }
            finish(t);
        }
        return t;
    }

    generated_txn read_only(txn_id id)
    {
        generated_txn t;
        t.id = id;
        t.cls = txn_class::read_only;
        std::vector<partition_id> all(static_cast<std::size_t>(cfg.n_partitions));
        for (partition_id p = 0; p < cfg.n_partitions; ++p) all[static_cast<std::size_t>(p)] = p;
        for (std::size_t i = all.size(); i > 1; --i) std::swap(all[i - 1], all[pick(rng, i)]);
        all.resize(static_cast<std::size_t>(cfg.ro_partitions_per_txn));
        std::set<std::string> used;
        t.reads = distinct(static_cast<std::size_t>(cfg.ro_keys_per_txn),
                           [&](std::size_t i) { return key_on(all[i % all.size()]); }, used);
        finish(t);
        return t;
    }

    generated_txn write_only(txn_id id)
    {
        generated_txn t;
        t.id = id;
        t.cls = txn_class::write_only;
        std::set<std::string> used;
        auto ws = distinct(static_cast<std::size_t>(cfg.writes_per_txn), [&](std::size_t) { return any_key(); }, used);
        for (std::size_t i = 0; i < ws.size(); ++i) t.writes.push_back({ws[i], value(id, i)});
        finish(t);
        return t;
    }
};

} // namespace

std::vector<generated_txn> generate(const workload_config& config, const keyspace& keys, std::uint64_t seed)
{
    config.validate();
    builder b{config, keys, std::mt19937_64(seed * 0x2545F4914F6CDD1DULL + 17)};
    std::vector<generated_txn> out;
    out.reserve(static_cast<std::size_t>(config.n_txns));
    const auto& m = config.mix;
    for (std::int32_t i = 0; i < config.n_txns; ++i) {
        auto id = static_cast<txn_id>(i + 1);
        double u = static_cast<double>(b.rng() >> 11) * 0x1.0p-53 * 100.0;
        if (u < m.local_rw) {
            out.push_back(b.local(id));
        } else if (u < m.local_rw + m.dist_rw) {
            out.push_back(b.distributed(id));
        } else if (u < m.local_rw + m.dist_rw + m.read_only) {
            out.push_back(b.read_only(id));
        } else {
            out.push_back(b.write_only(id));
        }
    }
    return out;
}

std::optional<std::string> audit(const generated_txn& t, const key_partitioner& partitioner)
{
    std::set<partition_id> ps;
    for (const auto& k : t.reads) ps.insert(partitioner(k));
    for (const auto& w : t.writes) ps.insert(partitioner(w.key));
    if (std::vector<partition_id>(ps.begin(), ps.end()) != t.partitions) return "partition list does not match keys";
    switch (t.cls) {
    case txn_class::local_rw:
        if (ps.size() != 1 || t.kind != txn_kind::local) return "local transaction spans several partitions";
        break;
    case txn_class::dist_rw:
        if (ps.size() < 2 || t.kind != txn_kind::distributed) return "distributed transaction spans one partition";
        break;
    case txn_class::read_only:
        if (!t.writes.empty() || t.kind != txn_kind::read_only) return "read-only transaction writes";
        break;
    case txn_class::write_only:
        if (!t.reads.empty()) return "write-only transaction reads";
        if ((ps.size() > 1) != (t.kind == txn_kind::distributed)) return "write-only kind does not match span";
        break;
    }
    return std::nullopt;
}

} // namespace transedge::workload
