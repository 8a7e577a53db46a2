#include <doctest.h>

#include "cross_partition.hpp"
#include "support.hpp"

using namespace transedge;
using namespace transedge::ledger;
using transedge::testing::deployment;
using transedge::testing::make_txn;

namespace {

struct two_partitions {
    deployment d{2, 1, 256};
    partition_ledger x{d.config(0)};
    partition_ledger y{d.config(1)};
    sim_time now = 0;

    const batch& certify(partition_ledger& l, partition_id p)
    {
        now += 10;
        const auto& b = l.seal(now);
        return l.commit_sealed(d.agree_cert(p, b.digest_value()));
    }

    transaction dist(txn_id id, std::size_t xi, std::size_t yi)
    {
        auto t = make_txn(id, txn_kind::distributed, {},
                          {{d.key_on(0, xi), "x"}, {d.key_on(1, yi), "y"}}, d.partitioner);
        t.coordinator = 0;
        return t;
    }

    void prepare_at_x(const transaction& t)
    {
        prepared_entry e;
        e.txn = t;
        e.role = prepare_role::coordinator;
        x.append_prepared(e);
    }

    commit_record record(const transaction& t, batch_id x_prepare, decision dec)
    {
        commit_record r;
        r.txn = t.id;
        r.coordinator = 0;
        r.d = dec;
        prepared_message own;
        own.txn = t.id;
        own.partition = 0;
        own.prepare_batch = x_prepare;
        own.cd = x.get_batch(x_prepare).cd;
        own.cert = d.reply_cert(0, own.claim_digest());
        prepared_message remote;
        remote.txn = t.id;
        remote.partition = 1;
        remote.v = dec == decision::commit ? vote::yes : vote::no;
        remote.prepare_batch = 0;
        remote.cd = cd_vector(std::vector<batch_id>{-1, 0});
        remote.cert = d.reply_cert(1, remote.claim_digest());
        r.votes = {own, remote};
        return r;
    }
};

} // namespace

TEST_CASE("two-partition commit: dependency vectors and LCE")
{
    testing::cross_partition_replay replay;
    auto out = replay.run();
    CHECK(out.x_commit_cd == cd_vector(std::vector<batch_id>{2, 5}));
    CHECK(out.x_commit_lce == 0);
    CHECK(out.y_commit_cd[0] == 0);
    CHECK(out.y_commit_cd[1] == 8);
    CHECK(out.y_commit_lce == 5);
    CHECK(out.y_prepare_cd == cd_vector(std::vector<batch_id>{-1, 5}));
    CHECK(out.x_committed == std::vector<txn_id>{3, 4, 5});
    CHECK(out.y_committed == std::vector<txn_id>{3, 4, 5});
    CHECK(out.x3_version == 2);
    CHECK(out.y3_version == 8);
    CHECK(out.followers_accepted_all);
    CHECK(out.followers_match);
}

TEST_CASE("local transaction lands in the local segment")
{
    two_partitions s;
    auto t = make_txn(1, txn_kind::local, {}, {{s.d.key_on(0, 0), "v"}}, s.d.partitioner);
    s.x.append_local(t);
    const auto& b = s.certify(s.x, 0);
    REQUIRE(b.local.size() == 1);
    CHECK(b.local[0] == t);
    CHECK(b.cd[0] == 0);
    CHECK(s.x.committed_version(s.d.key_on(0, 0)) == 0);
    CHECK(s.x.read(s.d.key_on(0, 0)).value == "v");
}

TEST_CASE("distributed append registers under the in-progress index")
{
    two_partitions s;
    s.certify(s.x, 0);
    auto t = s.dist(5, 1, 1);
    s.prepare_at_x(t);
    const auto* m = s.x.prepared().find(1, 5);
    REQUIRE(m != nullptr);
    CHECK(m->status == member_status::pending);
    CHECK(m->role == prepare_role::coordinator);
}

TEST_CASE("append after seal is refused")
{
    two_partitions s;
    s.x.seal(1);
    auto t = make_txn(1, txn_kind::local, {}, {{s.d.key_on(0, 0), "v"}}, s.d.partitioner);
    CHECK_THROWS_AS(s.x.append_local(t), segment_closed);
    CHECK_THROWS_AS(s.x.seal(2), segment_closed);
}

TEST_CASE("no ready group carries the LCE forward")
{
    two_partitions s;
    auto t = s.dist(5, 1, 1);
    s.prepare_at_x(t);
    s.certify(s.x, 0);
    const auto& b1 = s.certify(s.x, 0);
    CHECK(b1.committed.empty());
    CHECK(b1.lce == no_batch);
    CHECK(b1.cd == cd_vector(std::vector<batch_id>{1, -1}));
}

TEST_CASE("a younger ready group waits for the oldest")
{
    two_partitions s;
    auto t0 = s.dist(5, 1, 1);
    auto t1 = s.dist(6, 2, 2);
    s.prepare_at_x(t0);
    s.certify(s.x, 0); // b0
    s.prepare_at_x(t1);
    s.certify(s.x, 0); // b1
    s.x.record_vote(1, 6, s.record(t1, 1, decision::commit));
    CHECK(s.x.prepared().ready(1));
    CHECK_FALSE(s.x.prepared().ready(0));
    const auto& b2 = s.certify(s.x, 0);
    CHECK(b2.committed.empty());
    CHECK(b2.lce == no_batch);

    s.x.record_vote(0, 5, s.record(t0, 0, decision::commit));
    const auto& b3 = s.certify(s.x, 0);
    REQUIRE(b3.committed.size() == 2);
    CHECK(b3.committed[0].txn.id == 5);
    CHECK(b3.committed[1].txn.id == 6);
    CHECK(b3.lce == 1);
    CHECK(s.x.prepared().groups().empty());
}

TEST_CASE("abort vote releases the group without writes")
{
    two_partitions s;
    auto t = s.dist(5, 1, 1);
    s.prepare_at_x(t);
    s.certify(s.x, 0);
    s.x.record_vote(0, 5, s.record(t, 0, decision::abort));
    CHECK(s.x.prepared().find(0, 5)->status == member_status::abort);
    const auto& b1 = s.certify(s.x, 0);
    REQUIRE(b1.committed.size() == 1);
    CHECK(b1.committed[0].record.d == decision::abort);
    CHECK(b1.lce == 0);
    // an aborted member adds no dependency and no write
    CHECK(b1.cd == cd_vector(std::vector<batch_id>{1, -1}));
    CHECK(s.x.committed_version(s.d.key_on(0, 1)) == no_batch);
}

TEST_CASE("votes are idempotent and checked")
{
    two_partitions s;
    auto t = s.dist(5, 1, 1);
    s.prepare_at_x(t);
    s.certify(s.x, 0);
    auto rec = s.record(t, 0, decision::commit);
    s.x.record_vote(0, 5, rec);
    CHECK_NOTHROW(s.x.record_vote(0, 5, rec));
    CHECK_THROWS_AS(s.x.record_vote(0, 5, s.record(t, 0, decision::abort)), duplicate_vote);
    CHECK_THROWS_AS(s.x.record_vote(0, 99, rec), unknown_transaction);
    CHECK_THROWS_AS(s.x.record_vote(3, 5, rec), unknown_transaction);
}

TEST_CASE("batch lookup")
{
    two_partitions s;
    CHECK_THROWS_AS(s.x.get_latest(), unknown_batch);
    s.certify(s.x, 0);
    CHECK(s.x.get_batch(0).lce == no_batch);
    CHECK(s.x.get_batch(0).cd == cd_vector(std::vector<batch_id>{0, -1}));
    s.certify(s.x, 0);
    s.certify(s.x, 0);
    CHECK(s.x.get_latest().index == 2);
    CHECK_THROWS_AS(s.x.get_batch(99), unknown_batch);
}

TEST_CASE("earliest batch reaching an LCE")
{
    two_partitions s;
    auto t = s.dist(5, 1, 1);
    s.prepare_at_x(t);
    s.certify(s.x, 0); // b0
    s.certify(s.x, 0); // b1
    s.x.record_vote(0, 5, s.record(t, 0, decision::commit));
    s.certify(s.x, 0); // b2 drains group 0
    s.certify(s.x, 0); // b3
    CHECK(s.x.earliest_with_lce(0) == 2);
    CHECK(s.x.earliest_with_lce(-1) == 0);
    CHECK_FALSE(s.x.earliest_with_lce(1).has_value());
}

TEST_CASE("agreement failure restores the ledger")
{
    two_partitions s;
    auto t = s.dist(5, 1, 1);
    s.prepare_at_x(t);
    s.certify(s.x, 0);
    s.x.record_vote(0, 5, s.record(t, 0, decision::commit));
    auto root_before = s.x.store().latest_root();
    auto fresh = s.dist(6, 2, 2);
    s.prepare_at_x(fresh);
    s.x.append_local(make_txn(7, txn_kind::local, {}, {{s.d.key_on(0, 9), "v"}}, s.d.partitioner));
    const auto& sealed = s.x.seal(50);
    CHECK(sealed.committed.size() == 1);
    auto failed = s.x.abort_sealed();
    CHECK(failed.local.size() == 1);
    CHECK(s.x.store().latest_root() == root_before);
    CHECK(s.x.prepared().find(1, 6) == nullptr);
    CHECK(s.x.prepared().ready(0));
    CHECK(s.x.open());
    CHECK(s.x.in_progress().empty());
    // the restored group still drains next time
    const auto& b1 = s.certify(s.x, 0);
    CHECK(b1.committed.size() == 1);
    CHECK(b1.index == 1);
}

TEST_CASE("followers re-check proposals")
{
    two_partitions s;
    partition_ledger follower(s.d.config(0));
    auto key = s.d.key_on(0, 3);
    auto writer = make_txn(1, txn_kind::local, {}, {{key, "a"}}, s.d.partitioner);
    s.x.append_local(writer);
    const auto& b0 = s.x.seal(10);
    CHECK_FALSE(follower.validate(b0, s.d.context(10)));
    s.x.commit_sealed(s.d.agree_cert(0, b0.digest_value()));
    follower.apply_certified(s.x.get_latest());

    // a stale reader and a fresh reader of the same key
    auto stale = make_txn(2, txn_kind::local, {{key, "", no_batch}}, {{s.d.key_on(0, 4), "b"}}, s.d.partitioner);
    auto fresh = make_txn(3, txn_kind::local, {{key, "a", 0}}, {{s.d.key_on(0, 5), "c"}}, s.d.partitioner);
    auto verdict = s.x.check(stale);
    CHECK(verdict.reason == conflict::verdict_reason::stale_read);
    s.x.append_rejected(rejected_entry{stale, verdict.as_abort_reason(), 0});
    CHECK(s.x.check(fresh).ok);
    s.x.append_local(fresh);
    batch proposal = s.x.seal(20);
    auto ctx = s.d.context(20);
    CHECK_FALSE(follower.validate(proposal, ctx));

    SUBCASE("wrong vector")
    {
        auto bad = proposal;
        bad.cd[1] = 3;
        CHECK(follower.validate(bad, ctx).has_value());
    }
    SUBCASE("wrong root")
    {
        auto bad = proposal;
        bad.root[0] ^= 1;
        CHECK(follower.validate(bad, ctx) == std::optional<std::string>("merkle root mismatch"));
    }
    SUBCASE("unjustified rejection")
    {
        auto bad = proposal;
        bad.rejected[0].txn = make_txn(2, txn_kind::local, {{key, "a", 0}}, {{s.d.key_on(0, 4), "b"}}, s.d.partitioner);
        CHECK(follower.validate(bad, ctx) == std::optional<std::string>("unjustified rejection"));
    }
    SUBCASE("stale read smuggled into the batch")
    {
        auto bad = proposal;
        bad.local.push_back(stale);
        bad.rejected.clear();
        CHECK(follower.validate(bad, ctx).has_value());
    }
    SUBCASE("timestamp outside the window")
    {
        CHECK(follower.validate(proposal, s.d.context(20 + 30001)).has_value());
    }
    SUBCASE("out of sequence")
    {
        auto bad = proposal;
        bad.index = 5;
        CHECK(follower.validate(bad, ctx).has_value());
    }
}
