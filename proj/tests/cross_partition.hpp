#pragma once

// Two-partition walk-through of a distributed commit: X coordinates t3..t5,
// prepares them in its first batch, Y prepares them in its sixth batch, X
// commits them in its third batch and Y in its ninth. Every batch is also
// re-validated and applied by a follower replica of the same partition.

#include "support.hpp"

namespace transedge::testing {

struct cross_partition_outcome {
    cd_vector x_commit_cd;      // vector of X batch 2
    batch_id x_commit_lce = -2; // lce(b_2^X)
    cd_vector y_commit_cd;      // V_8^Y
    batch_id y_commit_lce = -2;
    cd_vector y_prepare_cd;     // V_5^Y
    std::vector<txn_id> x_committed;
    std::vector<txn_id> y_committed;
    batch_id x3_version = -2;
    batch_id y3_version = -2;
    bool followers_accepted_all = true;
    bool followers_match = true;
};

class cross_partition_replay {
public:
    cross_partition_replay()
        : d_(2, 1, 256),
          lx_(d_.config(0)), ly_(d_.config(1)),
          rx_(d_.config(0)), ry_(d_.config(1))
    {
    }

    cross_partition_outcome run()
    {
        cross_partition_outcome out;
        const partition_id X = 0, Y = 1;
        auto x = [&](std::size_t i) { return d_.key_on(X, i); };
        auto y = [&](std::size_t i) { return d_.key_on(Y, i); };

        // X b0: t0..t2 local, t3..t5 coordinator-prepared
        for (txn_id t = 0; t < 3; ++t) {
            lx_.append_local(make_txn(t, txn_kind::local, {}, {{x(t), "x" + std::to_string(t)}}, d_.partitioner));
        }
        std::vector<transaction> dist;
        for (txn_id t = 3; t < 6; ++t) {
            auto txn = make_txn(t, txn_kind::distributed, {}, {{x(t), "x" + std::to_string(t)}, {y(t), "y" + std::to_string(t)}},
                                d_.partitioner);
            txn.coordinator = X;
            dist.push_back(txn);
            prepared_entry e;
            e.txn = txn;
            e.role = prepare_role::coordinator;
            lx_.append_prepared(e);
        }
        step(lx_, rx_, X, out);
        // X b1
        lx_.append_local(make_txn(6, txn_kind::local, {}, {{x(6), "x6"}}, d_.partitioner));
        step(lx_, rx_, X, out);

        // Y b0..b4
        for (txn_id t = 10; t < 15; ++t) {
            ly_.append_local(make_txn(t, txn_kind::local, {}, {{y(t), "y"}}, d_.partitioner));
            step(ly_, ry_, Y, out);
        }
        // Y b5 prepares t3..t5 on receipt of X's certified coordinator-prepare
        std::vector<coordinator_prepare> requests;
        for (const auto& txn : dist) {
            coordinator_prepare cp;
            cp.txn = txn;
            cp.coordinator = X;
            cp.prepare_batch = 0;
            cp.cd = lx_.get_batch(0).cd;
            cp.cert = d_.reply_cert(X, cp.claim_digest());
            requests.push_back(cp);
            prepared_entry e;
            e.txn = txn;
            e.role = prepare_role::participant;
            e.request = cp;
            ly_.append_prepared(e);
        }
        step(ly_, ry_, Y, out);
        out.y_prepare_cd = ly_.get_batch(5).cd;

        // X collects votes and decides; the group drains into X b2
        std::vector<commit_record> records;
        for (const auto& cp : requests) {
            auto own = cp.as_vote();
            own.cert = d_.reply_cert(X, own.claim_digest());
            prepared_message yv;
            yv.txn = cp.txn.id;
            yv.partition = Y;
            yv.v = vote::yes;
            yv.prepare_batch = 5;
            yv.cd = ly_.get_batch(5).cd;
            yv.cert = d_.reply_cert(Y, yv.claim_digest());
            commit_record rec;
            rec.txn = cp.txn.id;
            rec.coordinator = X;
            rec.d = decision::commit;
            rec.votes = {own, yv};
            lx_.record_vote(0, rec.txn, rec);
            records.push_back(rec);
        }
        step(lx_, rx_, X, out);

        // Y seals two more batches before the commit records arrive
        for (txn_id t = 20; t < 22; ++t) {
            ly_.append_local(make_txn(t, txn_kind::local, {}, {{y(t), "y"}}, d_.partitioner));
            step(ly_, ry_, Y, out);
        }
        for (auto& rec : records) {
            rec.coordinator_cert = d_.reply_cert(X, rec.claim_digest());
            ly_.record_vote(5, rec.txn, rec);
        }
        step(ly_, ry_, Y, out);

        const auto& b2x = lx_.get_batch(2);
        const auto& b8y = ly_.get_batch(8);
        out.x_commit_cd = b2x.cd;
        out.x_commit_lce = b2x.lce;
        out.y_commit_cd = b8y.cd;
        out.y_commit_lce = b8y.lce;
        for (const auto& e : b2x.committed) out.x_committed.push_back(e.txn.id);
        for (const auto& e : b8y.committed) out.y_committed.push_back(e.txn.id);
        out.x3_version = lx_.committed_version(x(3));
        out.y3_version = ly_.committed_version(y(3));
        out.followers_match = rx_.get_latest().root == lx_.get_latest().root &&
                              ry_.get_latest().root == ly_.get_latest().root &&
                              rx_.latest_index() == lx_.latest_index() && ry_.latest_index() == ly_.latest_index();
        return out;
    }

    deployment& env() { return d_; }

private:
    void step(ledger::partition_ledger& leader, ledger::partition_ledger& follower, partition_id p, cross_partition_outcome& out)
    {
        now_ += 10;
        const auto& b = leader.seal(now_);
        auto ctx = d_.context(now_);
        if (follower.validate(b, ctx)) out.followers_accepted_all = false;
        leader.commit_sealed(d_.agree_cert(p, b.digest_value()));
        follower.apply_certified(leader.get_latest());
    }

    deployment d_;
    ledger::partition_ledger lx_, ly_, rx_, ry_;
    sim_time now_ = 0;
};

} // namespace transedge::testing
