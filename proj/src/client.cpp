#include "transedge/client.hpp"

#include "transedge/consensus.hpp"

#include <algorithm>

namespace transedge {

client::client(environment& env, node_id id, client_options options) : env_(env), id_(id), options_(std::move(options))
{
}

void client::enqueue(workload::generated_txn t, sim_time not_before)
{
    queue_.push_back({std::move(t), not_before});
}

void client::start()
{
    begin_next();
}

void client::begin_next()
{
    if (active_ || queue_.empty()) return;
    auto now = env_.network->now();
    if (queue_.front().not_before > now) {
        env_.network->set_timer(id_, queue_.front().not_before - now, {begin, 0, 0});
        return;
    }
    auto q = std::move(queue_.front());
    queue_.pop_front();
    active_.emplace();
    active_->txn = std::move(q.txn);
    const auto& t = active_->txn;
    active_->read_only = t.cls == workload::txn_class::read_only && options_.ro_mode == "transedge";
    if (env_.trace) {
        env_.trace->add(trace::submitted{now, t.id, std::string(workload::to_string(t.cls)),
                                         active_->read_only ? txn_kind::read_only : t.kind, id_, t.partitions});
    }
    if (active_->read_only) begin_ro();
    else begin_rw();
}

void client::on_message(const net::envelope& e)
{
    if (const auto* t = std::get_if<msg::timer>(&e.payload)) {
        if (t->kind == begin) begin_next();
        else if (t->kind == ro_deadline) on_ro_deadline(static_cast<partition_id>(t->a), t->b);
        else if (t->kind == ro_reask) on_ro_reask(static_cast<partition_id>(t->a), t->b);
        return;
    }
    if (const auto* m = std::get_if<msg::read_response>(&e.payload)) on_read_response(*m);
    else if (const auto* m = std::get_if<msg::client_reply>(&e.payload)) on_client_reply(*m);
    else if (const auto* m = std::get_if<msg::ro_reply>(&e.payload)) on_ro_reply(e.from, *m);
}

void client::finish()
{
    active_.reset();
    ++finished_;
    begin_next();
}

// ---------------------------------------------------------------- read-write

void client::begin_rw()
{
    auto& a = *active_;
    for (const auto& k : a.txn.reads) a.read_keys[env_.partitioner(k)].push_back(k);
    if (a.read_keys.empty()) {
        send_commit();
        return;
    }
    txn_id ids[] = {a.txn.id};
    for (const auto& [p, keys] : a.read_keys) {
        a.awaiting_reads.insert(p);
        env_.network->send(id_, env_.topo.leader(p), msg::read_request{a.txn.id, keys}, msg::category::client, ids);
    }
}

void client::on_read_response(const msg::read_response& m)
{
    if (!active_ || active_->read_only || active_->txn.id != m.txn || !active_->awaiting_reads.erase(m.partition)) return;
    auto& a = *active_;
    for (const auto& v : m.values) a.reads.push_back(v);
    if (a.awaiting_reads.empty()) send_commit();
}

void client::send_commit()
{
    auto& a = *active_;
    transaction t;
    t.id = a.txn.id;
    // Reads in program order.
    for (const auto& k : a.txn.reads) {
        auto it = std::find_if(a.reads.begin(), a.reads.end(), [&](const auto& r) { return r.key == k; });
        if (it != a.reads.end()) t.read_set.push_back(*it);
        else t.read_set.push_back({k, {}, no_batch});
    }
    t.write_set = a.txn.writes;
    t.partitions = partitions_of(t, env_.partitioner);
    if (t.partitions.size() > 1) {
        t.kind = txn_kind::distributed;
        t.coordinator = twopc::choose_coordinator(t, env_.partitioner);
        a.home = t.coordinator;
    } else {
        t.kind = txn_kind::local;
        a.home = t.partitions.front();
    }
    a.committing = true;

    if (env_.trace) {
        trace::commit_requested ev;
        ev.t = env_.network->now();
        ev.txn = t.id;
        ev.kind = t.kind;
        ev.coordinator = t.coordinator;
        ev.partitions = t.partitions;
        for (const auto& r : t.read_set) ev.reads.push_back({r.key, r.version});
        for (const auto& w : t.write_set) ev.writes.push_back(w.key);
        env_.trace->add(std::move(ev));
    }
    txn_id ids[] = {t.id};
    msg::commit_request req{std::move(t), id_};
    for (auto n : env_.fan_out(a.home)) env_.network->send(id_, n, req, msg::category::client, ids);
}

void client::on_client_reply(const msg::client_reply& m)
{
    if (!active_ || !active_->committing || m.claim.txn != active_->txn.id || m.claim.partition != active_->home) return;
    const auto& c = m.cert;
    if (c.what != m.claim.claim_digest() || c.threshold < env_.topo.reply_threshold() ||
        !c.verify(env_.registry, env_.topo.members(active_->home))) {
        return;
    }
    if (env_.trace) {
        env_.trace->add(trace::reply{env_.network->now(), m.claim.txn, id_, m.claim.committed, m.claim.reason,
                                     m.claim.partition, m.claim.batch});
    }
    finish();
}

// ---------------------------------------------------------------- read-only

void client::begin_ro()
{
    auto& a = *active_;
    std::map<partition_id, std::vector<std::string>> by_partition;
    for (const auto& k : a.txn.reads) by_partition[env_.partitioner(k)].push_back(k);
    for (auto& [p, keys] : by_partition) {
        std::sort(keys.begin(), keys.end());
        keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
        a.queries[p].keys = keys;
    }
    a.round1_partitions = static_cast<std::uint32_t>(a.queries.size());
    ask_all();
}

// ask() may finish the transaction, so iterate over a copy of the targets.
void client::ask_all()
{
    auto txn = active_->txn.id;
    std::vector<partition_id> ps;
    for (const auto& [p, q] : active_->queries) ps.push_back(p);
    for (auto p : ps) {
        if (!active_ || active_->txn.id != txn) return;
        ask(p);
    }
}

void client::ask(partition_id p)
{
    auto& a = *active_;
    auto& q = a.queries.at(p);
    // The leader first, then replicas in membership order.
    q.target = -1;
    for (auto n : env_.topo.members(p)) {
        if (!q.tried.count(n)) {
            q.target = n;
            break;
        }
    }
    if (q.target < 0) {
        // The whole cluster said it has nothing certified yet; a failed first
        // round does that. Wait one agreement timeout and start over.
        if (q.only_not_ready && q.not_ready_rounds < max_not_ready_rounds) {
            ++q.not_ready_rounds;
            q.tried.clear();
            q.attempt = next_attempt_++;
            env_.network->set_timer(id_, env_.params.agreement_timeout,
                                    {ro_reask, static_cast<std::uint64_t>(p), q.attempt});
            return;
        }
        finish_ro(false);
        return;
    }
    q.attempt = next_attempt_++;
    ++a.requests;
    txn_id ids[] = {a.txn.id};
    env_.network->send(id_, q.target, msg::ro_query{a.txn.id, q.round, q.keys, q.required_lce}, msg::category::ro, ids);
    auto wait = options_.ro_timeout + (q.round > 1 ? env_.params.dep_wait : 0);
    env_.network->set_timer(id_, wait, {ro_deadline, static_cast<std::uint64_t>(p), q.attempt});
}

void client::on_ro_deadline(partition_id p, std::uint64_t attempt)
{
    if (!active_ || !active_->read_only) return;
    auto it = active_->queries.find(p);
    if (it == active_->queries.end() || it->second.done || it->second.attempt != attempt) return;
    reject(p, "timeout");
}

void client::on_ro_reask(partition_id p, std::uint64_t attempt)
{
    if (!active_ || !active_->read_only) return;
    auto it = active_->queries.find(p);
    if (it == active_->queries.end() || it->second.done || it->second.attempt != attempt) return;
    ask(p);
}

void client::reject(partition_id p, const std::string& why)
{
    auto& a = *active_;
    auto& q = a.queries.at(p);
    if (env_.trace) {
        trace::ro_round ev;
        ev.t = env_.network->now();
        ev.txn = a.txn.id;
        ev.round = q.round;
        ev.partition = p;
        ev.node = q.target;
        ev.ok = false;
        ev.error = why;
        env_.trace->add(std::move(ev));
    }
    q.tried.insert(q.target);
    q.only_not_ready = q.only_not_ready && why == readonly::not_ready;
    ++a.retries;
    ask(p);
}

void client::on_ro_reply(node_id from, const msg::ro_reply& m)
{
    if (!active_ || !active_->read_only || active_->txn.id != m.txn) return;
    auto& a = *active_;
    auto it = a.queries.find(m.partition);
    if (it == a.queries.end()) return;
    auto& q = it->second;
    if (q.done || from != q.target || m.round != q.round) return;

    const auto p = m.partition;
    if (!m.ok) {
        reject(p, m.error.empty() ? "refused" : m.error);
        return;
    }
    const auto& h = m.resp.header;
    if (h.partition != p) {
        reject(p, "header from another partition");
        return;
    }
    if (!readonly::verify_response(m.resp, q.keys, env_.universe(p), env_.registry, env_.topo.members(p),
                                   env_.topo.reply_threshold())) {
        reject(p, "proof or certificate does not verify");
        return;
    }
    // Freshness bounds the first-round snapshot; a second-round batch is
    // pinned by its LCE instead.
    if (q.round == 1 && !readonly::check_freshness(h, env_.network->clock(id_), env_.params.delta)) {
        reject(p, "stale snapshot");
        return;
    }
    if (q.round > 1 && h.lce < q.required_lce) {
        reject(p, "snapshot does not reach the required prepare batch");
        return;
    }
    if (env_.trace) {
        env_.trace->add(trace::ro_round{env_.network->now(), a.txn.id, q.round, p, from, true, {}, h.index, h.lce,
                                        h.cd.entries()});
    }
    q.done = true;
    q.accepted = m.resp;
    a.final_responses[p] = m.resp;
    if (std::all_of(a.queries.begin(), a.queries.end(), [](const auto& kv) { return kv.second.done; })) round_complete();
}

void client::round_complete()
{
    auto& a = *active_;
    if (a.round == 1) a.round1_t = env_.network->now();
    if (a.round > 1 || options_.mutant) {
        finish_ro(true);
        return;
    }
    std::vector<batch_header> headers;
    for (const auto& [p, r] : a.final_responses) headers.push_back(r.header);
    auto need = readonly::verify_dependencies(headers);
    if (need.empty()) {
        finish_ro(true);
        return;
    }
    start_round(2, need);
}

void client::start_round(std::uint32_t round, const std::vector<readonly::unsatisfied_dependency>& need)
{
    auto& a = *active_;
    a.round = round;
    auto previous = std::move(a.queries);
    a.queries.clear();
    for (const auto& u : need) {
        auto& q = a.queries[u.partition];
        q.keys = previous.at(u.partition).keys;
        q.round = round;
        q.required_lce = u.required_prepare_batch;
    }
    a.round2_partitions = static_cast<std::uint32_t>(a.queries.size());
    ask_all();
}

void client::finish_ro(bool ok)
{
    auto& a = *active_;
    if (env_.trace) {
        trace::ro_done ev;
        ev.t = env_.network->now();
        ev.txn = a.txn.id;
        ev.ok = ok;
        ev.mutant = options_.mutant;
        ev.rounds = a.round;
        ev.round1_t = a.round1_t;
        ev.round1_partitions = a.round1_partitions;
        ev.round2_partitions = a.round2_partitions;
        ev.requests = a.requests;
        ev.retries = a.retries;
        if (ok) {
            for (const auto& [p, r] : a.final_responses) {
                for (const auto& e : r.proof.entries) {
                    ev.reads.push_back({e.key, p, e.present ? e.version : no_batch, r.header.index});
                }
            }
        }
        env_.trace->add(std::move(ev));
    }
    finish();
}

} // namespace transedge
