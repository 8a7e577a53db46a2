#include "transedge/consensus.hpp"

#include <algorithm>
#include <map>

namespace transedge {

namespace twopc {

partition_id choose_coordinator(const transaction& txn, const key_partitioner& partitioner)
{
    std::map<partition_id, std::size_t> count;
    for (const auto& r : txn.read_set) ++count[partitioner(r.key)];
    for (const auto& w : txn.write_set) ++count[partitioner(w.key)];
    partition_id best = -1;
    std::size_t most = 0;
    for (const auto& [p, n] : count) {
        if (n > most) { // map order makes the lowest id win ties
            best = p;
            most = n;
        }
    }
    return best;
}

bool coordinator_state::all_votes_in() const
{
    if (!own_vote) return false;
    for (auto p : txn.partitions)
        if (p != txn.coordinator && !votes.count(p)) return false;
    return true;
}

commit_record coordinator_state::decide(partition_id self) const
{
    commit_record rec;
    rec.txn = txn.id;
    rec.coordinator = self;
    rec.votes.push_back(*own_vote);
    for (const auto& [p, v] : votes) rec.votes.push_back(v);
    std::sort(rec.votes.begin(), rec.votes.end(),
              [](const auto& a, const auto& b) { return a.partition < b.partition; });
    rec.d = std::all_of(rec.votes.begin(), rec.votes.end(), [](const auto& v) { return v.v == vote::yes; })
                ? decision::commit
                : decision::abort;
    return rec;
}

} // namespace twopc

namespace {

bool contains(const std::vector<partition_id>& ps, partition_id p)
{
    return std::find(ps.begin(), ps.end(), p) != ps.end();
}

} // namespace

void replica::on_commit_request(node_id, const msg::commit_request& m)
{
    if (!leader_) {
        hold(m, msg::category::client, m.txn.id, false);
        return;
    }
    if (!ledger_.open()) {
        inbox_.push_back(m);
        return;
    }
    admit(m);
    maybe_seal_full();
}

void replica::on_coordinator_prepare(node_id, const msg::coordinator_prepare_msg& m)
{
    if (!leader_) {
        hold(m, msg::category::twopc, m.cp.txn.id, false);
        return;
    }
    if (!ledger_.open()) {
        inbox_.push_back(m);
        return;
    }
    admit(m);
    maybe_seal_full();
}

void replica::admit_inbox()
{
    while (ledger_.open() && !inbox_.empty()) {
        auto p = std::move(inbox_.front());
        inbox_.pop_front();
        admit(p);
    }
    maybe_seal_full();
}

void replica::admit(const msg::payload& p)
{
    if (const auto* req = std::get_if<msg::commit_request>(&p)) {
        const auto& t = req->txn;
        if (admitted_.count(t.id)) return;
        bool local_ok = t.kind == txn_kind::local && t.partitions == std::vector<partition_id>{partition_};
        bool dist_ok = t.kind == txn_kind::distributed && t.coordinator == partition_ && t.partitions.size() > 1 &&
                       contains(t.partitions, partition_);
        if (!local_ok && !dist_ok) return;
        admitted_.insert(t.id);
        client_of_[t.id] = req->client;
        auto v = ledger_.check(t);
        if (!v.ok) {
            ledger_.append_rejected({t, v.as_abort_reason(), v.other});
        } else if (local_ok) {
            ledger_.append_local(t);
        } else {
            ledger_.append_prepared({t, prepare_role::coordinator, vote::yes, abort_reason::none, 0, std::nullopt});
            auto& st = coord_[t.id];
            st.txn = t;
            st.client = req->client;
        }
        return;
    }
    if (const auto* m = std::get_if<msg::coordinator_prepare_msg>(&p)) {
        const auto& cp = m->cp;
        const auto& t = cp.txn;
        if (admitted_.count(t.id)) return;
        if (t.kind != txn_kind::distributed || !contains(t.partitions, partition_) || cp.coordinator != t.coordinator ||
            cp.coordinator == partition_ || cp.coordinator < 0 || cp.coordinator >= env_.topo.partitions()) {
            return;
        }
        if (cp.cert.what != cp.claim_digest() || cp.cert.threshold < env_.topo.reply_threshold() ||
            !cp.cert.verify(env_.registry, env_.topo.members(cp.coordinator))) {
            return;
        }
        admitted_.insert(t.id);
        auto v = ledger_.check(t);
        prepared_entry e{t, prepare_role::participant, v.ok ? vote::yes : vote::no,
                         v.ok ? abort_reason::none : v.as_abort_reason(), v.ok ? 0 : v.other, cp};
        ledger_.append_prepared(std::move(e));
    }
}

void replica::maybe_seal_full()
{
    if (!leader_ || !ledger_.open() || agreement_) return;
    const auto& b = ledger_.in_progress();
    auto n = b.local.size() + b.prepared.size() + b.rejected.size();
    if (n >= env_.params.max_batch_txns) seal_and_propose();
}

void replica::try_send_prepare(txn_id t)
{
    auto it = coord_.find(t);
    if (it == coord_.end()) return;
    auto& st = it->second;
    if (st.sent || !st.certified_prepare || !st.own_vote) return;
    st.sent = true;
    for (auto p : st.txn.partitions)
        if (p != partition_)
            send_to_cluster(p, msg::coordinator_prepare_msg{*st.certified_prepare}, msg::category::twopc, t);
}

void replica::on_prepared(node_id, const msg::prepared_msg& m)
{
    if (!leader_) {
        hold(m, msg::category::twopc, m.m.txn, true);
        return;
    }
    auto it = coord_.find(m.m.txn);
    if (it == coord_.end()) return;
    auto& st = it->second;
    auto p = m.m.partition;
    if (p == partition_ || !contains(st.txn.partitions, p) || st.votes.count(p)) return;
    if (m.m.cd.size() != static_cast<std::size_t>(env_.topo.partitions())) return;
    if (m.m.cert.what != m.m.claim_digest() || m.m.cert.threshold < env_.topo.reply_threshold() ||
        !m.m.cert.verify(env_.registry, env_.topo.members(p))) {
        return;
    }
    st.votes[p] = m.m;
    try_decide(m.m.txn);
}

void replica::try_decide(txn_id t)
{
    auto it = coord_.find(t);
    if (it == coord_.end()) return;
    auto& st = it->second;
    if (st.decided || !st.all_votes_in()) return;
    auto rec = st.decide(partition_);
    try {
        ledger_.record_vote(st.prepare_batch, t, rec);
    } catch (const ledger::unknown_transaction&) {
        return;
    } catch (const ledger::duplicate_vote&) {
        return;
    }
    st.decided = true;
}

void replica::on_commit(node_id, const msg::commit_msg& m)
{
    if (!leader_) {
        hold(m, msg::category::twopc, m.rec.txn, true);
        return;
    }
    const auto& rec = m.rec;
    const auto* own = rec.vote_of(partition_);
    if (!own || own->v != vote::yes || rec.coordinator == partition_) return;
    if (rec.coordinator < 0 || rec.coordinator >= env_.topo.partitions()) return;
    if (rec.coordinator_cert.what != rec.claim_digest() || rec.coordinator_cert.threshold < env_.topo.reply_threshold() ||
        !rec.coordinator_cert.verify(env_.registry, env_.topo.members(rec.coordinator))) {
        return;
    }
    try {
        ledger_.record_vote(own->prepare_batch, rec.txn, rec);
    } catch (const ledger::unknown_transaction&) {
    } catch (const ledger::duplicate_vote&) {
    }
}

void replica::send_to_cluster(partition_id p, const msg::payload& payload, msg::category cat, txn_id txn)
{
    txn_id ids[] = {txn};
    for (auto n : env_.fan_out(p)) env_.network->send(id_, n, payload, cat, ids);
}

// Backups keep what should reach the leader and forward it if the leader
// has not acted on it in time.
void replica::hold(const msg::payload& payload, msg::category cat, txn_id txn, bool needs_commit)
{
    auto id = next_hold_++;
    held_[id] = held{payload, cat, txn, needs_commit};
    env_.network->set_timer(id_, env_.params.forward_timeout, {forward, id, 0});
}

void replica::on_forward_timer(std::uint64_t id)
{
    auto it = held_.find(id);
    if (it == held_.end()) return;
    auto h = std::move(it->second);
    held_.erase(it);
    bool done = h.needs_commit ? seen_committed_.count(h.txn) > 0 : seen_admitted_.count(h.txn) > 0;
    if (done) return;
    txn_id ids[] = {h.txn};
    env_.network->send(id_, env_.topo.leader(partition_), std::move(h.payload), h.cat, ids);
}

void replica::note_installed(const batch& b)
{
    for (const auto& t : b.local) seen_admitted_.insert(t.id);
    for (const auto& e : b.prepared) seen_admitted_.insert(e.txn.id);
    for (const auto& r : b.rejected) seen_admitted_.insert(r.txn.id);
    for (const auto& e : b.committed) seen_committed_.insert(e.txn.id);
    if (!leader_) return;
    for (const auto& e : b.prepared) {
        if (e.role != prepare_role::coordinator) continue;
        if (auto it = coord_.find(e.txn.id); it != coord_.end()) it->second.prepare_batch = b.index;
    }
    for (const auto& e : b.committed) coord_.erase(e.txn.id);
    for (const auto& r : b.rejected) coord_.erase(r.txn.id);
}

// Nothing in a batch that failed agreement was ever certified, so no vote
// or reply went out for it. Everything is judged again against the current
// ledger: the conflicts that justified a refusal may have left with the batch.
void replica::requeue_failed(batch failed)
{
    auto readmit = [&](transaction t) {
        admitted_.erase(t.id);
        auto client = client_of_[t.id];
        admit(msg::commit_request{std::move(t), client});
    };
    for (auto& t : failed.local) readmit(std::move(t));
    for (auto& e : failed.prepared) {
        if (e.role == prepare_role::coordinator) {
            coord_.erase(e.txn.id);
            readmit(std::move(e.txn));
            continue;
        }
        auto v = ledger_.check(e.txn);
        e.v = v.ok ? vote::yes : vote::no;
        e.reason = v.ok ? abort_reason::none : v.as_abort_reason();
        e.conflicting = v.ok ? 0 : v.other;
        ledger_.append_prepared(std::move(e));
    }
    for (auto& r : failed.rejected) readmit(std::move(r.txn));
}

} // namespace transedge
