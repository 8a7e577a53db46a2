#include <doctest.h>

#include "transedge/merkle.hpp"

#include <map>
#include <random>

using namespace transedge;
using namespace transedge::merkle;

namespace {

std::shared_ptr<const key_universe> universe_of(int n)
{
    std::vector<std::string> keys;
    for (int i = 0; i < n; ++i) keys.push_back("key" + std::to_string(i));
    return std::make_shared<key_universe>(keys);
}

struct signed_root {
    std::shared_ptr<const crypto::signature_scheme> scheme = crypto::make_scheme("keyed-hash");
    crypto::key_registry registry{scheme};
    std::vector<crypto::node_key_pair> keys;
    std::vector<node_id> members{0, 1, 2, 3};

    signed_root()
    {
        for (auto id : members) {
            keys.push_back(scheme->generate(id, crypto::sha256("m" + std::to_string(id))));
            registry.add(id, keys.back().pub);
        }
    }

    crypto::quorum_certificate certify(const batch_header& h, int signers)
    {
        std::vector<crypto::signature> sigs;
        for (int i = 0; i < signers; ++i) sigs.push_back(crypto::sign(*scheme, keys[i], h.claim_digest()));
        crypto::quorum_certificate qc{h.claim_digest(), sigs, static_cast<std::uint32_t>(signers)};
        return qc;
    }
};

batch_header header_for(const merkle_store& s, batch_id b)
{
    batch_header h;
    h.index = b;
    h.lce = no_batch;
    h.cd = cd_vector(std::vector<batch_id>{b});
    h.root = s.root_at(b);
    h.timestamp = 1000;
    return h;
}

} // namespace

TEST_CASE("empty store root is the all-empty tree and stable")
{
    merkle_store a(universe_of(8));
    merkle_store b(universe_of(8));
    auto ra = a.apply_writes({}, 0);
    CHECK(ra == b.apply_writes({}, 0));
    CHECK(ra == merkle_store::rebuild_root(*universe_of(8), {}));
    auto e = empty_leaf_hash();
    auto l1 = interior_hash(e, e);
    auto l2 = interior_hash(l1, l1);
    CHECK(ra == interior_hash(l2, l2));
}

TEST_CASE("an empty update keeps the root and a rewrite records its new version")
{
    merkle_store s(universe_of(4));
    std::vector<write_entry> w{{"key1", "v1"}};
    auto r0 = s.apply_writes(w, 0);
    auto r1 = s.apply_writes({}, 1);
    CHECK(r0 == r1);
    // Versions are part of the leaf, so rewriting the same value moves the root.
    auto r2 = s.apply_writes(w, 2);
    CHECK(r2 != r1);
    CHECK(s.get("key1", 2).version == 2);
    CHECK(s.get("key1", 1).version == 0);
}

TEST_CASE("apply_writes rejects version regression")
{
    merkle_store s(universe_of(4));
    s.apply_writes({}, 3);
    CHECK_THROWS_AS(s.apply_writes({}, 3), version_regression);
    CHECK_THROWS_AS(s.apply_writes({}, 1), version_regression);
}

TEST_CASE("writes outside the universe are refused")
{
    merkle_store s(universe_of(4));
    std::vector<write_entry> w{{"nope", "v"}};
    CHECK_THROWS_AS(s.apply_writes(w, 0), key_not_in_universe);
}

TEST_CASE("property: incremental root equals full rebuild")
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        int n = 1 + static_cast<int>(rng() % 300);
        auto u = universe_of(n);
        merkle_store s(u);
        std::map<std::string, leaf_value> model;
        for (batch_id v = 0; v < 30; ++v) {
            std::vector<write_entry> writes;
            int count = static_cast<int>(rng() % 6);
            for (int i = 0; i < count; ++i) {
                auto key = "key" + std::to_string(rng() % static_cast<unsigned>(n));
                auto value = "val" + std::to_string(rng() % 1000);
                writes.push_back({key, value});
                model[key] = leaf_value{value, v, true};
            }
            auto root = s.apply_writes(writes, v);
            std::vector<std::pair<std::string, leaf_value>> leaves(model.begin(), model.end());
            CHECK(root == merkle_store::rebuild_root(*u, leaves));
        }
    }
}

TEST_CASE("proof in a one-key store has no siblings")
{
    auto u = universe_of(1);
    merkle_store s(u);
    std::vector<write_entry> w{{"key0", "x"}};
    s.apply_writes(w, 0);
    std::vector<std::string> keys{"key0"};
    auto p = s.prove(keys, 0);
    REQUIRE(p.entries.size() == 1);
    CHECK(p.entries[0].siblings.empty());
    CHECK(verify_inclusion(p, *u));
    CHECK(p.root == leaf_hash("key0", "x", 0));
}

TEST_CASE("proofs over a 1024-key store verify, including absent keys")
{
    auto u = universe_of(1024);
    merkle_store s(u);
    std::vector<write_entry> w;
    for (int i = 0; i < 1024; i += 3) w.push_back({"key" + std::to_string(i), "v" + std::to_string(i)});
    s.apply_writes(w, 0);
    std::vector<std::string> keys{"key0", "key3", "key1", "key1023", "key500"};
    auto p = s.prove(keys, 0);
    CHECK(verify_inclusion(p, *u));
    CHECK(p.entries[0].present);
    CHECK_FALSE(p.entries[2].present); // key1 never written
    CHECK(p.entries[2].version == no_batch);

    SUBCASE("tampered value fails")
    {
        p.entries[0].value[0] ^= 1;
        CHECK_FALSE(verify_inclusion(p, *u));
    }
    SUBCASE("absent entry cannot be claimed present")
    {
        p.entries[2].present = true;
        p.entries[2].value = "forged";
        CHECK_FALSE(verify_inclusion(p, *u));
    }
    SUBCASE("moving an entry to another position fails")
    {
        p.entries[1].position ^= 1;
        CHECK_FALSE(verify_inclusion(p, *u));
    }
}

TEST_CASE("property: any single-bit mutation breaks verification")
{
    auto u = universe_of(200);
    merkle_store s(u);
    std::vector<write_entry> w;
    for (int i = 0; i < 200; i += 2) w.push_back({"key" + std::to_string(i), "value" + std::to_string(i)});
    s.apply_writes(w, 0);
    std::vector<std::string> keys{"key4", "key7", "key150"};
    auto honest = s.prove(keys, 0);
    REQUIRE(verify_inclusion(honest, *u));
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 500; ++trial) {
        auto p = honest;
        auto& e = p.entries[rng() % p.entries.size()];
        switch (rng() % 4) {
        case 0:
            if (e.value.empty()) e.value = "x";
            else e.value[rng() % e.value.size()] ^= static_cast<char>(1 << (rng() % 8));
            break;
        case 1: e.version ^= std::int64_t{1} << (rng() % 8); break;
        case 2: e.siblings[rng() % e.siblings.size()][rng() % 32] ^= static_cast<std::uint8_t>(1 << (rng() % 8)); break;
        default: p.root[rng() % 32] ^= static_cast<std::uint8_t>(1 << (rng() % 8)); break;
        }
        CHECK_FALSE(verify_inclusion(p, *u));
    }
}

TEST_CASE("historical proofs are unaffected by later writes")
{
    auto u = universe_of(64);
    merkle_store s(u);
    std::vector<write_entry> w0{{"key5", "old"}};
    std::vector<write_entry> w1{{"key5", "new"}, {"key6", "x"}};
    s.apply_writes(w0, 0);
    std::vector<std::string> keys{"key5"};
    auto before = s.prove(keys, 0);
    s.apply_writes(w1, 1);
    auto after = s.prove(keys, 0);
    CHECK(before == after);
    CHECK(after.entries[0].value == "old");
    CHECK(s.prove(keys, 1).entries[0].value == "new");
    CHECK_THROWS_AS(s.prove(keys, 7), unknown_batch);
}

TEST_CASE("rollback drops only the newest root")
{
    merkle_store s(universe_of(16));
    std::vector<write_entry> w{{"key1", "a"}};
    auto r0 = s.apply_writes({}, 0);
    s.apply_writes(w, 1);
    s.rollback_latest();
    CHECK(s.latest_version() == 0);
    CHECK(s.latest_root() == r0);
    CHECK(s.apply_writes(w, 1) != r0);
}

TEST_CASE("verify_proof binds the certified header")
{
    auto u = universe_of(32);
    merkle_store s(u);
    std::vector<write_entry> w{{"key9", "nine"}};
    s.apply_writes(w, 0);
    s.apply_writes({}, 1);
    signed_root sr;
    std::vector<std::string> keys{"key9", "key10"};

    auto h1 = header_for(s, 1);
    auto proof = s.prove(keys, 1);
    CHECK(verify_proof(proof, *u, h1, sr.certify(h1, 2), sr.registry, sr.members, 2));
    // f signatures where f+1 are required
    CHECK_FALSE(verify_proof(proof, *u, h1, sr.certify(h1, 1), sr.registry, sr.members, 2));
    // a stale but consistent snapshot is still authentic
    auto h0 = header_for(s, 0);
    CHECK(verify_proof(s.prove(keys, 0), *u, h0, sr.certify(h0, 2), sr.registry, sr.members, 2));
    // certificate over another batch does not cover this proof
    CHECK_FALSE(verify_proof(proof, *u, h0, sr.certify(h0, 2), sr.registry, sr.members, 2));
    // a signer outside the cluster is not counted
    std::vector<node_id> other_cluster{2, 3, 9};
    CHECK_FALSE(verify_proof(proof, *u, h1, sr.certify(h1, 2), sr.registry, other_cluster, 2));
}
