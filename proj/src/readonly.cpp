#include "transedge/readonly.hpp"

#include <map>

namespace transedge::readonly {

cd_vector derive_dep_vector(const cd_vector& prev, partition_id self, batch_id index,
                            std::span<const committed_entry> committed)
{
    cd_vector out = prev;
    for (const auto& entry : committed) {
        if (entry.record.d != decision::commit) continue;
        for (const auto& v : entry.record.votes) {
            if (v.partition == self) continue;
            // The reported vector already carries that batch's transitive
            // dependencies; the prepare batch itself is the direct one.
            out.merge(v.cd);
            out[v.partition] = std::max(out[v.partition], v.prepare_batch);
        }
    }
    out[self] = index;
    return out;
}

std::vector<unsatisfied_dependency> verify_dependencies(std::span<const batch_header> headers)
{
    std::map<partition_id, batch_id> required;
    for (const auto& hi : headers) {
        for (const auto& hj : headers) {
            if (hi.partition == hj.partition) continue;
            batch_id need = hi.cd[hj.partition];
            if (need > hj.lce) {
                auto& slot = required.try_emplace(hj.partition, need).first->second;
                slot = std::max(slot, need);
            }
        }
    }
    std::vector<unsatisfied_dependency> out;
    for (const auto& [p, b] : required) out.push_back(unsatisfied_dependency{p, b});
    return out;
}

bool check_freshness(const batch_header& header, sim_time client_clock, sim_time delta)
{
    sim_time diff = client_clock - header.timestamp;
    return diff <= delta && -diff <= delta;
}

bool verify_response(const ro_response& response,
                     std::span<const std::string> keys,
                     const merkle::key_universe& universe,
                     const crypto::key_registry& registry,
                     std::span<const node_id> members,
                     std::uint32_t threshold)
{
    if (response.proof.entries.size() != keys.size()) return false;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        if (response.proof.entries[i].key != keys[i]) return false;
    }
    return merkle::verify_proof(response.proof, universe, response.header, response.cert, registry, members, threshold);
}

} // namespace transedge::readonly
