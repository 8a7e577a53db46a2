#include "transedge/consensus.hpp"

#include <algorithm>

namespace transedge {

void replica::on_read_request(node_id from, const msg::read_request& m)
{
    msg::read_response out{m.txn, partition_, {}};
    for (const auto& key : m.keys) {
        if (!ledger_.owns(key)) continue;
        auto lv = ledger_.read(key);
        out.values.push_back({key, lv.present ? lv.value : std::string{}, lv.present ? lv.version : no_batch});
    }
    txn_id ids[] = {m.txn};
    env_.network->send(id_, from, std::move(out), msg::category::client, ids);
}

std::optional<batch_id> replica::latest_served_batch() const
{
    if (latest_header_cert_ < 0) return std::nullopt;
    batch_id idx = latest_header_cert_;
    if (behavior_ == faults::behavior::stale_responder) {
        idx = std::max<batch_id>(0, idx - static_cast<batch_id>(spec_->param("lag", 3)));
    }
    while (idx >= 0 && !has_header_cert(idx)) --idx;
    if (idx < 0) return std::nullopt;
    return idx;
}

void replica::on_ro_query(node_id from, const msg::ro_query& q)
{
    if (q.round <= 1) {
        auto idx = latest_served_batch();
        if (!idx) {
            msg::ro_reply r{q.txn, partition_, q.round, false, {}, std::string(readonly::not_ready)};
            txn_id ids[] = {q.txn};
            env_.network->send(id_, from, std::move(r), msg::category::ro, ids);
            return;
        }
        serve(from, q, *idx);
        return;
    }
    auto k = ledger_.earliest_with_lce(q.required_lce);
    if (k && has_header_cert(*k)) {
        serve(from, q, *k);
        return;
    }
    parked_.push_back({from, q, env_.network->now() + env_.params.dep_wait});
    env_.network->set_timer(id_, env_.params.dep_wait, {dep_deadline, 0, 0});
}

void replica::serve(node_id client, const msg::ro_query& q, batch_id index)
{
    if (behavior_ == faults::behavior::stale_responder && q.round > 1) {
        // Lies in the second round too; clients notice the LCE falls short.
        auto lagged = std::max<batch_id>(0, index - static_cast<batch_id>(spec_->param("lag", 3)));
        while (lagged > 0 && !has_header_cert(lagged)) --lagged;
        if (has_header_cert(lagged)) index = lagged;
    }
    msg::ro_reply r{q.txn, partition_, q.round, false, {}, {}};
    txn_id ids[] = {q.txn};
    try {
        r.resp.proof = ledger_.store().prove(q.keys, index);
    } catch (const merkle::key_not_in_universe&) {
        r.error = "key not served by this partition";
        env_.network->send(id_, client, std::move(r), msg::category::ro, ids);
        return;
    }
    r.resp.header = ledger_.get_batch(index).header();
    r.resp.cert = header_certs_[static_cast<std::size_t>(index)];
    r.ok = true;
    if (behavior_ == faults::behavior::forged_proof && !r.resp.proof.entries.empty()) {
        auto& e = r.resp.proof.entries.front();
        if (!e.siblings.empty()) e.siblings.front()[0] ^= 0x01;
        else e.value += "!";
    }
    env_.network->send(id_, client, std::move(r), msg::category::ro, ids);
}

void replica::serve_parked()
{
    if (parked_.empty()) return;
    std::vector<parked_query> still;
    for (auto& p : parked_) {
        auto k = ledger_.earliest_with_lce(p.q.required_lce);
        if (k && has_header_cert(*k)) serve(p.client, p.q, *k);
        else still.push_back(std::move(p));
    }
    parked_ = std::move(still);
}

void replica::on_dep_deadline()
{
    auto now = env_.network->now();
    std::vector<parked_query> still;
    for (auto& p : parked_) {
        if (p.deadline <= now) {
            msg::ro_reply r{p.q.txn, partition_, p.q.round, false, {}, "dependency timeout"};
            txn_id ids[] = {p.q.txn};
            env_.network->send(id_, p.client, std::move(r), msg::category::ro, ids);
        } else {
            still.push_back(std::move(p));
        }
    }
    parked_ = std::move(still);
}

} // namespace transedge
