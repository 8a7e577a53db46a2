#include "transedge/types.hpp"

#include <stdexcept>

namespace transedge {

std::string_view to_string(txn_kind kind)
{
    switch (kind) {
    case txn_kind::local: return "local";
    case txn_kind::distributed: return "distributed";
    case txn_kind::read_only: return "read_only";
    }
    return "unknown";
}

txn_kind txn_kind_from_string(std::string_view text)
{
    if (text == "local") return txn_kind::local;
    if (text == "distributed") return txn_kind::distributed;
    if (text == "read_only") return txn_kind::read_only;
    throw std::invalid_argument("unknown transaction kind: " + std::string(text));
}

void cd_vector::merge(const cd_vector& other)
{
    if (other.size() != size()) {
        throw std::invalid_argument("cd_vector size mismatch");
    }
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        entries_[i] = std::max(entries_[i], other.entries_[i]);
    }
}

bool cd_vector::dominates(const cd_vector& other) const
{
    if (other.size() != size()) {
        return false;
    }
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i] < other.entries_[i]) {
            return false;
        }
    }
    return true;
}

cd_vector pairwise_max(cd_vector a, const cd_vector& b)
{
    a.merge(b);
    return a;
}

partition_id key_partitioner::operator()(std::string_view key) const
{
    // FNV-1a, then a splitmix finalizer so short sequential keys spread evenly.
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : key) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    h ^= h >> 30;
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 27;
    h *= 0x94d049bb133111ebULL;
    h ^= h >> 31;
    return static_cast<partition_id>(h % static_cast<std::uint64_t>(partitions_));
}

std::vector<partition_id> partitions_of(const transaction& txn, const key_partitioner& partitioner)
{
    std::vector<partition_id> out;
    for (const auto& r : txn.read_set) out.push_back(partitioner(r.key));
    for (const auto& w : txn.write_set) out.push_back(partitioner(w.key));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

} // namespace transedge
