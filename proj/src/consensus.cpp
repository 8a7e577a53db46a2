#include "transedge/consensus.hpp"

#include <algorithm>
#include <cassert>

namespace transedge {

namespace consensus {

namespace {

client_reply_claim reply_of(partition_id self, batch_id index, txn_id txn, bool committed, abort_reason reason)
{
    return client_reply_claim{txn, self, committed, committed ? abort_reason::none : reason, index};
}

claim make(claim::kind k, digest d, txn_id t, claim::body_type body = {})
{
    claim c;
    c.what = k;
    c.d = d;
    c.txn = t;
    c.body = std::move(body);
    return c;
}

} // namespace

std::vector<claim> batch_claims(const batch& b, partition_id self)
{
    std::vector<claim> out;
    out.push_back(make(claim::kind::header, b.header().claim_digest(), 0));

    for (const auto& e : b.prepared) {
        if (e.role == prepare_role::coordinator) {
            coordinator_prepare cp;
            cp.txn = e.txn;
            cp.coordinator = self;
            cp.prepare_batch = b.index;
            cp.cd = b.cd;
            auto vote_msg = cp.as_vote();
            out.push_back(make(claim::kind::coordinator_prepare, cp.claim_digest(), e.txn.id, cp));
            out.push_back(make(claim::kind::own_vote, vote_msg.claim_digest(), e.txn.id, vote_msg));
        } else {
            prepared_message m;
            m.txn = e.txn.id;
            m.partition = self;
            m.v = e.v;
            m.prepare_batch = b.index;
            m.cd = b.cd;
            out.push_back(make(claim::kind::participant_vote, m.claim_digest(), e.txn.id, m));
        }
    }
    for (const auto& e : b.committed) {
        if (e.record.coordinator != self) continue;
        out.push_back(make(claim::kind::commit_record, e.record.claim_digest(), e.txn.id, e.record));
        auto r = reply_of(self, b.index, e.txn.id, e.record.d == decision::commit, abort_reason::negative_vote);
        out.push_back(make(claim::kind::client_reply, r.claim_digest(), e.txn.id, r));
    }
    for (const auto& t : b.local) {
        auto r = reply_of(self, b.index, t.id, true, abort_reason::none);
        out.push_back(make(claim::kind::client_reply, r.claim_digest(), t.id, r));
    }
    for (const auto& rj : b.rejected) {
        auto r = reply_of(self, b.index, rj.txn.id, false, rj.reason);
        out.push_back(make(claim::kind::client_reply, r.claim_digest(), rj.txn.id, r));
    }
    return out;
}

client_reply_claim reply_claim_for(const batch& b, partition_id self, txn_id txn)
{
    for (const auto& t : b.local)
        if (t.id == txn) return reply_of(self, b.index, txn, true, abort_reason::none);
    for (const auto& r : b.rejected)
        if (r.txn.id == txn) return reply_of(self, b.index, txn, false, r.reason);
    for (const auto& e : b.committed)
        if (e.txn.id == txn)
            return reply_of(self, b.index, txn, e.record.d == decision::commit, abort_reason::negative_vote);
    throw ledger::unknown_transaction("transaction has no reply in batch " + std::to_string(b.index));
}

} // namespace consensus

namespace {

template <class... F>
struct overloaded : F... {
    using F::operator()...;
};
template <class... F>
overloaded(F...) -> overloaded<F...>;

trace::batch_installed trace_event(const batch& b, const digest& d, node_id node, sim_time t, bool valid)
{
    trace::batch_installed ev;
    ev.t = t;
    ev.node = node;
    ev.partition = b.partition;
    ev.index = b.index;
    ev.digest_hex = crypto::to_hex(d);
    ev.lce = b.lce;
    ev.cd = b.cd.entries();
    ev.timestamp = b.timestamp;
    ev.valid = valid;
    for (const auto& t2 : b.local) ev.local.push_back(t2.id);
    for (const auto& e : b.prepared) ev.prepared.push_back({e.txn.id, e.role, e.v, e.reason, e.conflicting});
    for (const auto& e : b.committed) ev.committed.push_back({e.txn.id, e.prepare_batch, e.record.d});
    for (const auto& r : b.rejected) ev.rejected.push_back({r.txn.id, r.reason, r.conflicting});
    return ev;
}

// A corrupted copy whose vector misstates one dependency.
std::shared_ptr<batch> with_bad_vector(const batch& b)
{
    auto m = std::make_shared<batch>(b);
    auto victim = static_cast<partition_id>(m->cd.size() > 1 ? (b.partition + 1) % static_cast<partition_id>(m->cd.size())
                                                             : b.partition);
    m->cd[victim] += 1;
    return m;
}

} // namespace

replica::replica(environment& env, node_id id)
    : env_(env),
      id_(id),
      partition_(env.topo.partition_of(id)),
      leader_(env.topo.leader(partition_) == id),
      behavior_(env.faults.of(id)),
      spec_(env.faults.find(id)),
      ledger_(ledger::ledger_config{partition_, env.topo.partitions(), env.partitioner,
                                    env.universes.at(static_cast<std::size_t>(partition_))})
{
}

void replica::start()
{
    if (behavior_ == faults::behavior::mute) env_.network->mute(id_);
    if (!leader_) return;
    seal_and_propose(); // genesis
    env_.network->set_timer(id_, env_.params.batch_interval, {tick, 0, 0});
}

void replica::on_message(const net::envelope& e)
{
    std::visit(overloaded{
                   [&](const msg::propose& m) { on_propose(e.from, m.b); },
                   [&](const msg::validate_reply& m) { on_validate_reply(e.from, m); },
                   [&](const msg::certified& m) { on_certified(e.from, m); },
                   [&](const msg::reply_sigs& m) { on_reply_sigs(e.from, m); },
                   [&](const msg::read_request& m) { on_read_request(e.from, m); },
                   [&](const msg::read_response&) {},
                   [&](const msg::commit_request& m) { on_commit_request(e.from, m); },
                   [&](const msg::client_reply&) {},
                   [&](const msg::coordinator_prepare_msg& m) { on_coordinator_prepare(e.from, m); },
                   [&](const msg::prepared_msg& m) { on_prepared(e.from, m); },
                   [&](const msg::commit_msg& m) { on_commit(e.from, m); },
                   [&](const msg::ro_query& m) { on_ro_query(e.from, m); },
                   [&](const msg::ro_reply&) {},
                   [&](const msg::timer& t) {
                       switch (t.kind) {
                       case tick: on_tick(); break;
                       case agreement_deadline: on_agreement_deadline(static_cast<batch_id>(t.a), t.b); break;
                       case forward: on_forward_timer(t.a); break;
                       case dep_deadline: on_dep_deadline(); break;
                       case flush:
                           if (agreement_ && agreement_->index == static_cast<batch_id>(t.a)) flush_certified();
                           break;
                       default: break;
                       }
                   },
               },
               e.payload);
}

ledger::validation_context replica::context() const
{
    return ledger::validation_context{&env_.topo, &env_.registry, env_.network->clock(id_), env_.params.delta};
}

crypto::signature replica::sign_digest(const digest& d) const
{
    auto s = crypto::sign(*env_.scheme, env_.keys.at(static_cast<std::size_t>(id_)), d);
    if (behavior_ == faults::behavior::forge_sig) {
        for (auto& byte : s.data) byte = static_cast<std::uint8_t>(byte ^ 0x5a);
    }
    return s;
}

bool replica::valid_signature(node_id from, const digest& d, const crypto::signature& s) const
{
    return s.signer == from && env_.registry.verify(d, s);
}

// ---------------------------------------------------------------- leader

void replica::on_tick()
{
    if (ledger_.open() && !agreement_) {
        auto now = env_.network->clock(id_);
        if (ledger_.has_pending_work(ledger_.next_index()) || now - last_seal_ >= env_.params.heartbeat) {
            seal_and_propose();
        }
    }
    env_.network->set_timer(id_, env_.params.batch_interval, {tick, 0, 0});
}

void replica::seal_and_propose()
{
    auto now = env_.network->clock(id_);
    const batch& sealed = ledger_.seal(now);
    last_seal_ = now;

    agreement a;
    a.index = sealed.index;
    auto real = std::make_shared<const batch>(sealed);
    auto ids = real->txn_ids();

    std::vector<node_id> backups;
    for (auto n : env_.topo.members(partition_))
        if (n != id_) backups.push_back(n);

    auto add_version = [&](msg::batch_ptr b, std::vector<node_id> to) {
        version v;
        v.b = std::move(b);
        v.d = v.b->digest_value();
        v.recipients = std::move(to);
        v.sigs.push_back(sign_digest(v.d));
        a.versions.push_back(std::move(v));
    };

    if (behavior_ == faults::behavior::bad_cd_vector && env_.network->uniform01() < spec_->param("rate", 0.3)) {
        add_version(with_bad_vector(sealed), backups);
    } else if (behavior_ == faults::behavior::equivocate) {
        // Split honest backups so the real batch can just reach a quorum
        // with the colluders' help, and everyone else sees a twin.
        auto colluders = env_.faults.colluders(env_.topo, partition_);
        std::vector<node_id> honest, allies;
        for (auto n : backups)
            (std::find(colluders.begin(), colluders.end(), n) != colluders.end() ? allies : honest).push_back(n);
        auto need = std::max<std::int64_t>(0, static_cast<std::int64_t>(env_.topo.agree_threshold()) -
                                                  static_cast<std::int64_t>(colluders.size()));
        auto split = static_cast<std::size_t>(std::min<std::int64_t>(need, static_cast<std::int64_t>(honest.size())));
        std::vector<node_id> first(honest.begin(), honest.begin() + static_cast<std::ptrdiff_t>(split));
        std::vector<node_id> second(honest.begin() + static_cast<std::ptrdiff_t>(split), honest.end());
        first.insert(first.end(), allies.begin(), allies.end());
        add_version(real, first);
        if (!second.empty()) {
            auto twin = std::make_shared<batch>(sealed);
            twin->timestamp += 1;
            second.insert(second.end(), allies.begin(), allies.end());
            add_version(twin, second);
        }
    } else {
        add_version(real, backups);
    }
    a.real = a.versions.front().b == real ? a.versions.front().d : real->digest_value();

    agreement_ = std::move(a);
    for (const auto& v : agreement_->versions)
        for (auto n : v.recipients) env_.network->send(id_, n, msg::propose{v.b}, msg::category::consensus, ids);
    env_.network->set_timer(id_, env_.params.agreement_timeout,
                            {agreement_deadline, static_cast<std::uint64_t>(agreement_->index), 0});
    check_agreement();
}

void replica::on_validate_reply(node_id from, const msg::validate_reply& r)
{
    if (!leader_ || !agreement_ || r.index != agreement_->index || r.partition != partition_) return;
    auto members = env_.topo.members(partition_);
    if (std::find(members.begin(), members.end(), from) == members.end()) return;
    auto& a = *agreement_;
    a.replied.insert(from);
    if (!r.sig) {
        a.rejected.insert(from);
    } else {
        for (auto& v : a.versions) {
            if (v.d != r.what) continue;
            bool dup = std::any_of(v.sigs.begin(), v.sigs.end(), [&](const auto& s) { return s.signer == from; });
            if (!dup && valid_signature(from, v.d, *r.sig)) v.sigs.push_back(*r.sig);
            else if (!dup) a.rejected.insert(from);
        }
    }
    check_agreement();
}

void replica::check_agreement()
{
    auto& a = *agreement_;
    auto threshold = env_.topo.agree_threshold();
    bool fresh = false;
    for (auto& v : a.versions) {
        if (v.certified || v.sigs.size() < threshold) continue;
        try {
            v.cert = crypto::assemble_certificate(v.d, v.sigs, threshold, env_.registry, env_.topo.members(partition_));
            v.certified = true;
            fresh = true;
        } catch (const crypto::insufficient_signatures&) {
        }
    }
    if (fresh) {
        if (!a.installed) {
            auto it = std::find_if(a.versions.begin(), a.versions.end(), [](const auto& v) { return v.certified; });
            bool valid = true;
            if (it->d == a.real) {
                ledger_.commit_sealed(it->cert);
            } else {
                ledger_.abort_sealed();
                batch copy = *it->b;
                copy.certificate = it->cert;
                ledger_.apply_certified(copy);
                valid = false;
            }
            a.installed = true;
            installed(ledger_.get_latest(), it->d, valid);
            if (behavior_ == faults::behavior::equivocate) {
                env_.network->set_timer(id_, env_.params.equivocation_flush,
                                        {flush, static_cast<std::uint64_t>(a.index), 0});
            }
        }
        if (behavior_ != faults::behavior::equivocate) {
            flush_certified();
            return;
        }
    }
    if (!a.installed && a.rejected.size() >= static_cast<std::size_t>(env_.topo.f() + 1)) {
        fail_agreement("rejected by " + std::to_string(a.rejected.size()) + " replicas");
    }
}

void replica::flush_certified()
{
    auto& a = *agreement_;
    auto first = std::find_if(a.versions.begin(), a.versions.end(), [](const auto& v) { return v.certified; });
    assert(first != a.versions.end());
    auto ids = first->b->txn_ids();
    for (const auto& v : a.versions) {
        const version& send = v.certified ? v : *first;
        msg::certified out{send.b, send.cert};
        for (auto n : v.recipients) env_.network->send(id_, n, out, msg::category::consensus, ids);
    }
    agreement_.reset();
    admit_inbox();
}

void replica::on_agreement_deadline(batch_id index, std::uint64_t attempt)
{
    if (!agreement_ || agreement_->index != index || agreement_->attempt != attempt || agreement_->installed) return;
    auto& a = *agreement_;
    if (attempt == 0) {
        // One resend to whoever stayed silent, then give up.
        for (const auto& v : a.versions) {
            auto ids = v.b->txn_ids();
            for (auto n : v.recipients)
                if (!a.replied.count(n))
                    env_.network->send(id_, n, msg::propose{v.b}, msg::category::consensus, ids);
        }
        a.attempt = 1;
        env_.network->set_timer(id_, env_.params.agreement_timeout,
                                {agreement_deadline, static_cast<std::uint64_t>(index), 1});
        return;
    }
    fail_agreement("agreement timeout");
}

void replica::fail_agreement(const std::string& reason)
{
    if (env_.trace) {
        env_.trace->add(trace::agreement_failed{env_.network->now(), partition_, agreement_->index, reason});
    }
    batch failed = ledger_.abort_sealed();
    agreement_.reset();
    requeue_failed(std::move(failed));
    admit_inbox();
}

// ---------------------------------------------------------------- backup

void replica::on_propose(node_id from, const msg::batch_ptr& b)
{
    if (leader_ || from != env_.topo.leader(partition_) || !b || b->partition != partition_) return;
    auto next = ledger_.next_index();
    if (b->index < next) return;
    if (b->index > next) {
        future_proposals_[b->index] = b;
        return;
    }
    handle_proposal(b);
}

void replica::handle_proposal(const msg::batch_ptr& b)
{
    auto d = b->digest_value();
    proposal_digest_[b->index] = {b, d};
    msg::validate_reply r{partition_, b->index, d, std::nullopt, {}};
    auto leader = env_.topo.leader(partition_);
    auto ids = b->txn_ids();
    auto reply = [&] { env_.network->send(id_, leader, r, msg::category::consensus, ids); };

    if (behavior_ == faults::behavior::equivocate) {
        r.sig = sign_digest(d); // colludes with the leader: signs whatever it is shown
        reply();
        return;
    }
    auto s = signed_.find(b->index);
    if (s != signed_.end() && s->second != d) {
        r.reject = "already signed a different batch at this index";
        reply();
        return;
    }
    auto& seen = validated_[b->index];
    bool ok;
    if (auto it = seen.find(d); it != seen.end()) {
        ok = it->second;
        if (!ok) r.reject = "previously rejected";
    } else {
        auto err = ledger_.validate(*b, context());
        ok = !err;
        seen[d] = ok;
        if (err) r.reject = *err;
    }
    if (ok) {
        signed_[b->index] = d;
        if (behavior_ == faults::behavior::bad_cd_vector) r.sig = sign_digest(with_bad_vector(*b)->digest_value());
        else r.sig = sign_digest(d);
    }
    reply();
}

void replica::on_certified(node_id from, const msg::certified& m)
{
    if (leader_ || from != env_.topo.leader(partition_) || !m.b || m.b->partition != partition_) return;
    auto next = ledger_.next_index();
    if (m.b->index < next) return;
    if (m.b->index > next) {
        future_certified_[m.b->index] = m;
        return;
    }
    apply(m);
    drain_buffered();
}

void replica::apply(const msg::certified& m)
{
    const auto& b = m.b;
    const auto& c = m.cert;
    digest d;
    auto pd = proposal_digest_.find(b->index);
    if (pd != proposal_digest_.end() && pd->second.first == b) d = pd->second.second;
    else d = b->digest_value();
    if (c.what != d || c.threshold < env_.topo.agree_threshold() ||
        !c.verify(env_.registry, env_.topo.members(partition_))) {
        return;
    }
    bool valid;
    auto vs = validated_.find(b->index);
    if (vs != validated_.end() && vs->second.count(d)) valid = vs->second[d];
    else valid = !ledger_.validate(*b, context());
    batch copy = *b;
    copy.certificate = c;
    ledger_.apply_certified(copy);
    validated_.erase(validated_.begin(), validated_.upper_bound(b->index));
    signed_.erase(signed_.begin(), signed_.lower_bound(b->index));
    future_proposals_.erase(future_proposals_.begin(), future_proposals_.upper_bound(b->index));
    proposal_digest_.erase(proposal_digest_.begin(), proposal_digest_.upper_bound(b->index));
    installed(ledger_.get_latest(), d, valid);
}

void replica::drain_buffered()
{
    for (;;) {
        auto next = ledger_.next_index();
        future_certified_.erase(future_certified_.begin(), future_certified_.lower_bound(next));
        if (auto it = future_certified_.find(next); it != future_certified_.end()) {
            auto m = it->second;
            future_certified_.erase(it);
            apply(m);
            if (ledger_.next_index() == next) break; // bogus certificate
            continue;
        }
        if (auto it = future_proposals_.find(next); it != future_proposals_.end()) {
            auto b = it->second;
            future_proposals_.erase(it);
            handle_proposal(b);
        }
        break;
    }
}

void replica::installed(const batch& b, const digest& d, bool valid)
{
    if (env_.trace) env_.trace->add(trace_event(b, d, id_, env_.network->now(), valid));
    note_installed(b);
    publish_claims(b);
    serve_parked();
}

// ---------------------------------------------------------------- claims

bool replica::has_header_cert(batch_id index) const
{
    return index >= 0 && static_cast<std::size_t>(index) < header_certs_.size() &&
           !header_certs_[static_cast<std::size_t>(index)].empty();
}

void replica::publish_claims(const batch& b)
{
    auto claims = consensus::batch_claims(b, partition_);
    msg::reply_sigs full{partition_, b.index, {}, {}};
    for (auto& c : claims) {
        auto sig = sign_digest(c.d);
        full.claims.push_back(c.d);
        full.sigs.push_back(sig);
        if (leader_ || c.what == consensus::claim::kind::header) {
            if (!completed_.count(c.d)) {
                waiting_[c.d].push_back({c, b.index});
                pool_[c.d].push_back(sig);
            }
        }
    }
    msg::reply_sigs header_only{partition_, b.index, {full.claims.front()}, {full.sigs.front()}};
    auto ids = b.txn_ids();
    auto leader = env_.topo.leader(partition_);
    for (auto n : env_.topo.members(partition_)) {
        if (n == id_) continue;
        env_.network->send(id_, n, n == leader ? full : header_only, msg::category::consensus, ids);
    }
    for (const auto& d : full.claims) try_claim(d);
}

void replica::on_reply_sigs(node_id from, const msg::reply_sigs& m)
{
    if (m.partition != partition_ || m.claims.size() != m.sigs.size()) return;
    auto members = env_.topo.members(partition_);
    if (std::find(members.begin(), members.end(), from) == members.end()) return;
    for (std::size_t i = 0; i < m.claims.size(); ++i) {
        const auto& d = m.claims[i];
        if (m.sigs[i].signer != from || completed_.count(d)) continue;
        auto& pool = pool_[d];
        if (std::any_of(pool.begin(), pool.end(), [&](const auto& s) { return s.signer == from; })) continue;
        pool.push_back(m.sigs[i]);
        try_claim(d);
    }
}

void replica::try_claim(const digest& d)
{
    auto w = waiting_.find(d);
    if (w == waiting_.end()) return;
    auto p = pool_.find(d);
    if (p == pool_.end() || p->second.size() < env_.topo.reply_threshold()) return;
    quorum_certificate cert;
    try {
        cert = crypto::assemble_certificate(d, p->second, env_.topo.reply_threshold(), env_.registry,
                                            env_.topo.members(partition_));
    } catch (const crypto::insufficient_signatures&) {
        return;
    }
    completed_.insert(d);
    auto actions = std::move(w->second);
    waiting_.erase(w);
    pool_.erase(p);
    for (const auto& a : actions) run_claim(a, cert);
}

void replica::run_claim(const pending_claim& p, const quorum_certificate& cert)
{
    using kind = consensus::claim::kind;
    const auto& c = p.c;
    switch (c.what) {
    case kind::header: {
        auto i = static_cast<std::size_t>(p.index);
        if (header_certs_.size() <= i) header_certs_.resize(i + 1);
        header_certs_[i] = cert;
        latest_header_cert_ = std::max(latest_header_cert_, p.index);
        serve_parked();
        break;
    }
    case kind::coordinator_prepare: {
        auto it = coord_.find(c.txn);
        if (it == coord_.end()) break;
        auto cp = std::get<coordinator_prepare>(c.body);
        cp.cert = cert;
        it->second.certified_prepare = std::move(cp);
        try_send_prepare(c.txn);
        break;
    }
    case kind::own_vote: {
        auto it = coord_.find(c.txn);
        if (it == coord_.end()) break;
        auto v = std::get<prepared_message>(c.body);
        v.cert = cert;
        it->second.own_vote = std::move(v);
        try_send_prepare(c.txn);
        try_decide(c.txn);
        break;
    }
    case kind::participant_vote: {
        auto m = std::get<prepared_message>(c.body);
        m.cert = cert;
        const auto* member = ledger_.prepared().find(p.index, c.txn);
        partition_id coordinator = -1;
        if (member) coordinator = member->txn.coordinator;
        else {
            for (const auto& e : ledger_.get_batch(p.index).prepared)
                if (e.txn.id == c.txn) coordinator = e.txn.coordinator;
        }
        if (coordinator >= 0) send_to_cluster(coordinator, msg::prepared_msg{m}, msg::category::twopc, c.txn);
        break;
    }
    case kind::commit_record: {
        auto rec = std::get<commit_record>(c.body);
        rec.coordinator_cert = cert;
        for (const auto& v : rec.votes)
            if (v.partition != partition_)
                send_to_cluster(v.partition, msg::commit_msg{rec}, msg::category::twopc, c.txn);
        break;
    }
    case kind::client_reply: {
        auto it = client_of_.find(c.txn);
        if (it == client_of_.end()) break;
        txn_id ids[] = {c.txn};
        env_.network->send(id_, it->second, msg::client_reply{std::get<client_reply_claim>(c.body), cert},
                           msg::category::client, ids);
        client_of_.erase(it);
        break;
    }
    }
}

} // namespace transedge
