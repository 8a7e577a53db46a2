#include "transedge/ledger.hpp"

#include "transedge/readonly.hpp"

#include <algorithm>
#include <set>

namespace transedge::ledger {

void prepared_batches::add(batch_id b, prepared_member member)
{
    index_.add(member.txn, owns_);
    auto id = member.txn.id;
    groups_[b].insert_or_assign(id, std::move(member));
}

void prepared_batches::remove_group(batch_id b)
{
    auto it = groups_.find(b);
    if (it == groups_.end()) return;
    for (const auto& [id, m] : it->second) index_.remove(m.txn, owns_);
    groups_.erase(it);
}

void prepared_batches::remove_member(batch_id b, txn_id t)
{
    auto it = groups_.find(b);
    if (it == groups_.end()) return;
    auto m = it->second.find(t);
    if (m == it->second.end()) return;
    index_.remove(m->second.txn, owns_);
    it->second.erase(m);
    if (it->second.empty()) groups_.erase(it);
}

const prepared_member* prepared_batches::find(batch_id b, txn_id t) const
{
    auto it = groups_.find(b);
    if (it == groups_.end()) return nullptr;
    auto m = it->second.find(t);
    return m == it->second.end() ? nullptr : &m->second;
}

bool prepared_batches::record_vote(batch_id b, txn_id t, const commit_record& record)
{
    auto it = groups_.find(b);
    if (it == groups_.end() || !it->second.count(t)) {
        throw unknown_transaction("no prepared transaction " + std::to_string(t) + " in batch " + std::to_string(b));
    }
    auto& m = it->second.at(t);
    if (m.status != member_status::pending) {
        if (m.record && m.record->claim_digest() == record.claim_digest()) return false;
        throw duplicate_vote("conflicting decision for transaction " + std::to_string(t));
    }
    m.status = record.d == decision::commit ? member_status::commit : member_status::abort;
    m.record = record;
    return true;
}

bool prepared_batches::ready(batch_id b) const
{
    auto it = groups_.find(b);
    if (it == groups_.end()) return false;
    return std::none_of(it->second.begin(), it->second.end(),
                        [](const auto& kv) { return kv.second.status == member_status::pending; });
}

std::vector<batch_id> prepared_batches::ready_prefix(batch_id before) const
{
    std::vector<batch_id> out;
    for (const auto& [b, g] : groups_) {
        if (b >= before || !ready(b)) break;
        out.push_back(b);
    }
    return out;
}

prepared_batches::group prepared_batches::take(batch_id b)
{
    auto it = groups_.find(b);
    if (it == groups_.end()) return {};
    for (const auto& [id, m] : it->second) index_.remove(m.txn, owns_);
    group g = std::move(it->second);
    groups_.erase(it);
    return g;
}

void prepared_batches::restore(batch_id b, group g)
{
    for (const auto& [id, m] : g) index_.add(m.txn, owns_);
    groups_[b] = std::move(g);
}

std::size_t prepared_batches::member_count() const
{
    std::size_t n = 0;
    for (const auto& [b, g] : groups_) n += g.size();
    return n;
}

partition_ledger::partition_ledger(ledger_config config)
    : config_(std::move(config)),
      store_(config_.universe),
      prepared_([this](const std::string& key) { return owns(key); })
{
    pending_.partition = config_.self;
    pending_.index = 0;
}

const batch& partition_ledger::get_batch(batch_id index) const
{
    if (index < 0 || index >= static_cast<batch_id>(log_.size())) {
        throw unknown_batch("no certified batch " + std::to_string(index));
    }
    return log_[static_cast<std::size_t>(index)];
}

const batch& partition_ledger::get_latest() const
{
    if (log_.empty()) throw unknown_batch("log is empty");
    return log_.back();
}

std::optional<batch_id> partition_ledger::earliest_with_lce(batch_id prepare_batch) const
{
    // LCE never decreases along the log, so the first match is found by bisection.
    auto it = std::partition_point(log_.begin(), log_.end(), [&](const batch& b) { return b.lce < prepare_batch; });
    if (it == log_.end()) return std::nullopt;
    return it->index;
}

batch_id partition_ledger::committed_version(const std::string& key) const
{
    auto it = versions_.find(key);
    return it == versions_.end() ? no_batch : it->second;
}

merkle::leaf_value partition_ledger::read(const std::string& key) const
{
    if (log_.empty()) return merkle::leaf_value{};
    return store_.get(key, latest_index());
}

cd_vector partition_ledger::current_cd() const
{
    return log_.empty() ? cd_vector(static_cast<std::size_t>(config_.partitions)) : log_.back().cd;
}

batch_id partition_ledger::current_lce() const
{
    return log_.empty() ? no_batch : log_.back().lce;
}

conflict::ledger_view partition_ledger::view(const conflict::key_index* in_progress,
                                             const conflict::key_index* prepared) const
{
    conflict::ledger_view v;
    v.owns = [this](const std::string& key) { return owns(key); };
    v.committed_version = [this](const std::string& key) { return committed_version(key); };
    v.in_progress = in_progress;
    v.prepared = prepared;
    return v;
}

conflict::verdict partition_ledger::check(const transaction& txn) const
{
    return conflict::check(txn, view(&pending_index_, &prepared_.index()));
}

void partition_ledger::append_local(const transaction& txn)
{
    if (state_ != state::open) throw segment_closed("batch is sealing");
    pending_index_.add(txn, [this](const std::string& key) { return owns(key); });
    pending_.local.push_back(txn);
}

void partition_ledger::append_prepared(prepared_entry entry)
{
    if (state_ != state::open) throw segment_closed("batch is sealing");
    if (entry.v == vote::yes) {
        pending_index_.add(entry.txn, [this](const std::string& key) { return owns(key); });
        prepared_.add(next_index(), prepared_member{entry.txn, entry.role, member_status::pending, std::nullopt});
    }
    pending_.prepared.push_back(std::move(entry));
}

void partition_ledger::append_rejected(rejected_entry entry)
{
    if (state_ != state::open) throw segment_closed("batch is sealing");
    pending_.rejected.push_back(std::move(entry));
}

bool partition_ledger::has_pending_work(batch_id drainable_before) const
{
    return !pending_.empty() || !prepared_.ready_prefix(drainable_before).empty();
}

void partition_ledger::record_vote(batch_id prepare_batch, txn_id txn, const commit_record& record)
{
    for (const auto& [b, g] : drained_) {
        if (b != prepare_batch) continue;
        auto it = g.find(txn);
        if (it == g.end()) break;
        if (it->second.record && it->second.record->claim_digest() == record.claim_digest()) return;
        throw duplicate_vote("conflicting decision for transaction " + std::to_string(txn));
    }
    prepared_.record_vote(prepare_batch, txn, record);
}

std::vector<write_entry> partition_ledger::batch_writes(const batch& b) const
{
    std::vector<write_entry> out;
    auto take = [&](const transaction& t) {
        for (const auto& w : t.write_set) {
            if (owns(w.key) && config_.universe->position(w.key)) out.push_back(w);
        }
    };
    for (const auto& t : b.local) take(t);
    for (const auto& e : b.committed) {
        if (e.record.d == decision::commit) take(e.txn);
    }
    return out;
}

const batch& partition_ledger::seal(sim_time now)
{
    if (state_ != state::open) throw segment_closed("batch already sealing");
    batch_id index = next_index();
    pending_.partition = config_.self;
    pending_.index = index;
    pending_.committed.clear();
    for (auto g : prepared_.ready_prefix(index)) {
        auto group = prepared_.take(g);
        for (const auto& [id, m] : group) {
            pending_.committed.push_back(committed_entry{m.txn, g, *m.record});
        }
        drained_.emplace_back(g, std::move(group));
    }
    pending_.lce = drained_.empty() ? current_lce() : drained_.back().first;
    pending_.cd = readonly::derive_dep_vector(current_cd(), config_.self, index, pending_.committed);
    drop_speculative();
    pending_.root = store_.apply_writes(batch_writes(pending_), index);
    pending_.timestamp = now;
    state_ = state::sealing;
    return pending_;
}

void partition_ledger::install(const batch& b, const std::vector<write_entry>& writes)
{
    for (const auto& w : writes) versions_[w.key] = b.index;
    log_.push_back(b);
}

const batch& partition_ledger::commit_sealed(const crypto::quorum_certificate& cert)
{
    if (state_ != state::sealing) throw segment_closed("no sealed batch");
    pending_.certificate = cert;
    install(pending_, batch_writes(pending_));
    drained_.clear();
    pending_index_.clear();
    pending_ = batch{};
    pending_.partition = config_.self;
    pending_.index = next_index();
    state_ = state::open;
    return log_.back();
}

batch partition_ledger::abort_sealed()
{
    if (state_ != state::sealing) throw segment_closed("no sealed batch");
    store_.rollback_latest();
    prepared_.remove_group(pending_.index);
    for (auto& [g, group] : drained_) prepared_.restore(g, std::move(group));
    drained_.clear();
    pending_index_.clear();
    batch failed = std::move(pending_);
    pending_ = batch{};
    pending_.partition = config_.self;
    pending_.index = next_index();
    state_ = state::open;
    return failed;
}

std::optional<std::string> partition_ledger::validate_appended(const batch& proposal, const validation_context& ctx) const
{
    auto owner = [this](const std::string& key) { return owns(key); };
    std::set<txn_id> ids;
    conflict::key_index batch_index;
    for (const auto& t : proposal.local) {
        if (t.kind != txn_kind::local) return "non-local transaction in local segment";
        if (t.partitions != std::vector<partition_id>{config_.self}) return "local transaction spans other partitions";
        for (const auto& w : t.write_set) {
            if (!owns(w.key)) return "local transaction writes a foreign key";
        }
        for (const auto& r : t.read_set) {
            if (!owns(r.key)) return "local transaction reads a foreign key";
        }
        if (!ids.insert(t.id).second) return "duplicate transaction in batch";
        batch_index.add(t, owner);
    }
    for (const auto& e : proposal.prepared) {
        const auto& t = e.txn;
        if (t.kind != txn_kind::distributed) return "non-distributed transaction in prepared segment";
        if (!std::binary_search(t.partitions.begin(), t.partitions.end(), config_.self)) {
            return "prepared transaction does not access this partition";
        }
        if (e.role == prepare_role::coordinator) {
            if (t.coordinator != config_.self || e.v != vote::yes || e.request) return "malformed coordinator prepare";
        } else {
            if (!e.request || !(e.request->txn == t) || e.request->coordinator != t.coordinator ||
                t.coordinator == config_.self) {
                return "malformed participant prepare";
            }
            const auto& req = *e.request;
            if (req.cert.what != req.claim_digest() ||
                req.cert.signatures.size() < ctx.topo->reply_threshold() ||
                !req.cert.verify(*ctx.keys, ctx.topo->members(req.coordinator))) {
                return "coordinator prepare certificate invalid";
            }
        }
        if (!ids.insert(t.id).second) return "duplicate transaction in batch";
        for (const auto& [g, group] : prepared_.groups()) {
            if (group.count(t.id)) return "transaction already prepared";
        }
        if (e.v == vote::yes) batch_index.add(t, owner);
    }
    auto v = view(&batch_index, &prepared_.index());
    for (const auto& t : proposal.local) {
        if (!conflict::check(t, v).ok) return "local transaction fails conflict check";
    }
    auto must_fail = [&](const transaction& t, abort_reason reason) -> bool {
        if (reason == abort_reason::agreement_failed) return true;
        if (reason != abort_reason::stale_read && reason != abort_reason::conflicts_in_progress &&
            reason != abort_reason::conflicts_prepared) {
            return false;
        }
        return !conflict::check(t, v).ok;
    };
    for (const auto& e : proposal.prepared) {
        if (e.v == vote::yes) {
            if (!conflict::check(e.txn, v).ok) return "prepared transaction fails conflict check";
        } else if (!must_fail(e.txn, e.reason)) {
            return "unjustified no vote";
        }
    }
    for (const auto& r : proposal.rejected) {
        if (!must_fail(r.txn, r.reason)) return "unjustified rejection";
    }
    return std::nullopt;
}

std::optional<std::string> partition_ledger::validate_committed(const batch& proposal, const validation_context& ctx) const
{
    // Drained groups must be the oldest groups, whole, in order.
    std::vector<batch_id> order;
    for (const auto& e : proposal.committed) {
        if (order.empty() || order.back() != e.prepare_batch) {
            if (!order.empty() && e.prepare_batch < order.back()) return "committed groups out of order";
            order.push_back(e.prepare_batch);
        }
    }
    auto g = prepared_.groups().begin();
    for (auto b : order) {
        if (g == prepared_.groups().end() || g->first != b) return "committed segment skips an older prepare group";
        std::size_t listed = std::count_if(proposal.committed.begin(), proposal.committed.end(),
                                           [&](const committed_entry& e) { return e.prepare_batch == b; });
        if (listed != g->second.size()) return "prepare group drained partially";
        ++g;
    }
    batch_id expected_lce = order.empty() ? current_lce() : order.back();
    if (proposal.lce != expected_lce) return "wrong LCE";

    for (const auto& e : proposal.committed) {
        const auto* m = prepared_.find(e.prepare_batch, e.txn.id);
        if (m == nullptr || !(m->txn == e.txn)) return "committed transaction was not prepared here";
        const auto& rec = e.record;
        if (rec.txn != e.txn.id || !rec.consistent(e.txn.partitions)) return "inconsistent commit record";
        const auto* own = rec.vote_of(config_.self);
        if (m->role == prepare_role::coordinator) {
            if (rec.coordinator != config_.self) return "commit record names another coordinator";
            if (own == nullptr || own->v != vote::yes || own->prepare_batch != e.prepare_batch ||
                !(own->cd == get_batch(e.prepare_batch).cd)) {
                return "coordinator vote does not match its prepare batch";
            }
            for (const auto& v : rec.votes) {
                if (v.txn != rec.txn) return "vote for another transaction";
                if (v.cert.what != v.claim_digest() || v.cert.signatures.size() < ctx.topo->reply_threshold() ||
                    !v.cert.verify(*ctx.keys, ctx.topo->members(v.partition))) {
                    return "vote certificate invalid";
                }
            }
        } else {
            if (rec.coordinator != e.txn.coordinator) return "commit record from wrong coordinator";
            if (own == nullptr || own->prepare_batch != e.prepare_batch || own->v != vote::yes) {
                return "commit record misreports this partition's vote";
            }
            const auto& cc = rec.coordinator_cert;
            if (cc.what != rec.claim_digest() || cc.signatures.size() < ctx.topo->reply_threshold() ||
                !cc.verify(*ctx.keys, ctx.topo->members(rec.coordinator))) {
                return "coordinator certificate invalid";
            }
        }
    }
    return std::nullopt;
}

std::optional<std::string> partition_ledger::validate(const batch& proposal, const validation_context& ctx)
{
    if (state_ != state::open || !pending_.empty()) return "ledger has an open proposal";
    if (proposal.partition != config_.self) return "proposal for another partition";
    if (proposal.index != next_index()) return "proposal index out of sequence";
    if (proposal.timestamp - ctx.now > ctx.delta || ctx.now - proposal.timestamp > ctx.delta) {
        return "timestamp outside the accepted window";
    }
    if (proposal.cd.size() != static_cast<std::size_t>(config_.partitions)) return "vector has wrong size";
    if (auto err = validate_appended(proposal, ctx)) return err;
    if (auto err = validate_committed(proposal, ctx)) return err;
    auto cd = readonly::derive_dep_vector(current_cd(), config_.self, proposal.index, proposal.committed);
    if (!(cd == proposal.cd)) return "dependency vector mismatch";
    for (const auto& t : proposal.local) {
        for (const auto& w : t.write_set) {
            if (!config_.universe->position(w.key)) return "write outside the key universe";
        }
    }
    drop_speculative();
    auto root = store_.apply_writes(batch_writes(proposal), proposal.index);
    if (root != proposal.root) {
        store_.rollback_latest();
        return "merkle root mismatch";
    }
    // Kept until the certified batch arrives; usually it is this one.
    speculative_ = proposal.index;
    return std::nullopt;
}

void partition_ledger::drop_speculative()
{
    if (speculative_ == no_batch) return;
    store_.rollback_latest();
    speculative_ = no_batch;
}

void partition_ledger::apply_certified(const batch& certified)
{
    if (state_ != state::open || !pending_.empty()) throw segment_closed("cannot apply while a proposal is open");
    if (certified.index != next_index()) throw unknown_batch("certified batch out of sequence");
    for (const auto& e : certified.committed) prepared_.remove_member(e.prepare_batch, e.txn.id);
    for (const auto& e : certified.prepared) {
        if (e.v == vote::yes) {
            prepared_.add(certified.index, prepared_member{e.txn, e.role, member_status::pending, std::nullopt});
        }
    }
    auto writes = batch_writes(certified);
    if (speculative_ != certified.index || store_.root_at(certified.index) != certified.root) {
        drop_speculative();
        store_.apply_writes(writes, certified.index);
    }
    speculative_ = no_batch;
    install(certified, writes);
    pending_.index = next_index();
}

} // namespace transedge::ledger
