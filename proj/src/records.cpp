#include "transedge/records.hpp"

#include <algorithm>
#include <stdexcept>

namespace transedge {

namespace {

// Type tags keep digests of different structures from colliding.
enum tag : std::uint8_t {
    tag_txn = 0x01,
    tag_header = 0x10,
    tag_prepared = 0x11,
    tag_coord_prepare = 0x12,
    tag_commit = 0x13,
    tag_reply = 0x14,
    tag_batch = 0x20,
};

void encode_vote_summary(crypto::canonical_writer& w, const prepared_message& m)
{
    w.u64(m.txn).u32(static_cast<std::uint32_t>(m.partition)).u8(static_cast<std::uint8_t>(m.v)).i64(m.prepare_batch);
    encode(w, m.cd);
}

void encode_record(crypto::canonical_writer& w, const commit_record& r, bool with_certs)
{
    w.u64(r.txn).u32(static_cast<std::uint32_t>(r.coordinator)).u8(static_cast<std::uint8_t>(r.d));
    w.u32(static_cast<std::uint32_t>(r.votes.size()));
    for (const auto& v : r.votes) {
        encode_vote_summary(w, v);
        if (with_certs) w.blob(v.cert.encode());
    }
    if (with_certs) w.blob(r.coordinator_cert.encode());
}

} // namespace

std::string_view to_string(abort_reason r)
{
    switch (r) {
    case abort_reason::none: return "none";
    case abort_reason::stale_read: return "stale_read";
    case abort_reason::conflicts_in_progress: return "conflicts_in_progress";
    case abort_reason::conflicts_prepared: return "conflicts_prepared";
    case abort_reason::negative_vote: return "negative_vote";
    case abort_reason::agreement_failed: return "agreement_failed";
    }
    return "none";
}

abort_reason abort_reason_from_string(std::string_view s)
{
    for (auto r : {abort_reason::none, abort_reason::stale_read, abort_reason::conflicts_in_progress,
                   abort_reason::conflicts_prepared, abort_reason::negative_vote, abort_reason::agreement_failed}) {
        if (to_string(r) == s) return r;
    }
    throw std::invalid_argument("unknown abort reason: " + std::string(s));
}

void encode(crypto::canonical_writer& w, const transaction& txn)
{
    w.u8(tag_txn).u64(txn.id).u8(static_cast<std::uint8_t>(txn.kind));
    w.u32(static_cast<std::uint32_t>(txn.read_set.size()));
    for (const auto& r : txn.read_set) w.str(r.key).str(r.value).i64(r.version);
    w.u32(static_cast<std::uint32_t>(txn.write_set.size()));
    for (const auto& wr : txn.write_set) w.str(wr.key).str(wr.value);
    w.u32(static_cast<std::uint32_t>(txn.partitions.size()));
    for (auto p : txn.partitions) w.u32(static_cast<std::uint32_t>(p));
    w.u32(static_cast<std::uint32_t>(txn.coordinator));
}

void encode(crypto::canonical_writer& w, const cd_vector& cd)
{
    w.u32(static_cast<std::uint32_t>(cd.size()));
    for (auto e : cd.entries()) w.i64(e);
}

digest txn_digest(const transaction& txn)
{
    crypto::canonical_writer w;
    encode(w, txn);
    return w.finish();
}

digest batch_header::claim_digest() const
{
    crypto::canonical_writer w;
    w.u8(tag_header).u32(static_cast<std::uint32_t>(partition)).i64(index).i64(lce);
    encode(w, cd);
    w.hash(root).i64(timestamp);
    return w.finish();
}

digest prepared_message::claim_digest() const
{
    crypto::canonical_writer w;
    w.u8(tag_prepared);
    encode_vote_summary(w, *this);
    return w.finish();
}

digest coordinator_prepare::claim_digest() const
{
    crypto::canonical_writer w;
    w.u8(tag_coord_prepare).hash(txn_digest(txn)).u32(static_cast<std::uint32_t>(coordinator)).i64(prepare_batch);
    encode(w, cd);
    return w.finish();
}

prepared_message coordinator_prepare::as_vote() const
{
    // The coordinator's own prepare doubles as its yes vote; its claim is a
    // different digest, so the vote certificate is issued separately.
    prepared_message m;
    m.txn = txn.id;
    m.partition = coordinator;
    m.v = vote::yes;
    m.prepare_batch = prepare_batch;
    m.cd = cd;
    return m;
}

digest commit_record::claim_digest() const
{
    crypto::canonical_writer w;
    w.u8(tag_commit);
    encode_record(w, *this, false);
    return w.finish();
}

const prepared_message* commit_record::vote_of(partition_id p) const
{
    for (const auto& v : votes) {
        if (v.partition == p) return &v;
    }
    return nullptr;
}

bool commit_record::consistent(const std::vector<partition_id>& partitions) const
{
    bool all_yes = true;
    for (auto p : partitions) {
        const auto* v = vote_of(p);
        if (v == nullptr || v->txn != txn) {
            // An abort needs only one certified no vote.
            all_yes = false;
            continue;
        }
        if (v->v == vote::no) all_yes = false;
    }
    if (d == decision::commit) {
        return all_yes && votes.size() == partitions.size();
    }
    return std::any_of(votes.begin(), votes.end(), [&](const prepared_message& v) { return v.txn == txn && v.v == vote::no; });
}

digest client_reply_claim::claim_digest() const
{
    crypto::canonical_writer w;
    w.u8(tag_reply).u64(txn).u32(static_cast<std::uint32_t>(partition)).boolean(committed);
    w.u8(static_cast<std::uint8_t>(reason)).i64(batch);
    return w.finish();
}

digest batch::digest_value() const
{
    crypto::canonical_writer w;
    w.u8(tag_batch).u32(static_cast<std::uint32_t>(partition)).i64(index);
    w.u32(static_cast<std::uint32_t>(local.size()));
    for (const auto& t : local) encode(w, t);
    w.u32(static_cast<std::uint32_t>(prepared.size()));
    for (const auto& e : prepared) {
        encode(w, e.txn);
        w.u8(static_cast<std::uint8_t>(e.role)).u8(static_cast<std::uint8_t>(e.v));
        w.u8(static_cast<std::uint8_t>(e.reason)).u64(e.conflicting);
        w.boolean(e.request.has_value());
        if (e.request) {
            w.hash(e.request->claim_digest()).blob(e.request->cert.encode());
        }
    }
    w.u32(static_cast<std::uint32_t>(committed.size()));
    for (const auto& e : committed) {
        encode(w, e.txn);
        w.i64(e.prepare_batch);
        encode_record(w, e.record, true);
    }
    w.u32(static_cast<std::uint32_t>(rejected.size()));
    for (const auto& r : rejected) {
        encode(w, r.txn);
        w.u8(static_cast<std::uint8_t>(r.reason)).u64(r.conflicting);
    }
    encode(w, cd);
    w.i64(lce).hash(root).i64(timestamp);
    return w.finish();
}

batch_header batch::header() const
{
    return batch_header{partition, index, lce, cd, root, timestamp};
}

std::vector<txn_id> batch::txn_ids() const
{
    std::vector<txn_id> ids;
    for (const auto& t : local) ids.push_back(t.id);
    for (const auto& e : prepared) ids.push_back(e.txn.id);
    for (const auto& e : committed) ids.push_back(e.txn.id);
    for (const auto& r : rejected) ids.push_back(r.txn.id);
    return ids;
}

} // namespace transedge
