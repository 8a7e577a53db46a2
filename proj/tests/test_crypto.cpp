#include <doctest.h>

#include "transedge/crypto.hpp"

#include <random>

using namespace transedge;
using namespace transedge::crypto;

namespace {

digest seed_for(node_id id)
{
    return sha256("node-seed-" + std::to_string(id));
}

struct fixture {
    std::shared_ptr<const signature_scheme> scheme;
    key_registry registry;
    std::vector<node_key_pair> keys;

    explicit fixture(std::string_view name, int n = 7) : scheme(make_scheme(name)), registry(scheme)
    {
        for (int i = 0; i < n; ++i) {
            keys.push_back(scheme->generate(i, seed_for(i)));
            registry.add(i, keys.back().pub);
        }
    }
};

} // namespace

TEST_CASE("sha256 matches the standard test vector")
{
    CHECK(to_hex(sha256("abc")) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(digest_from_hex(to_hex(sha256("abc"))) == sha256("abc"));
}

TEST_CASE("canonical writer is little-endian and length-prefixed")
{
    canonical_writer w;
    w.u32(0x01020304).str("ab");
    std::vector<std::uint8_t> expected{4, 3, 2, 1, 2, 0, 0, 0, 'a', 'b'};
    CHECK(w.data() == expected);
    canonical_reader r(w.data());
    CHECK(r.u32() == 0x01020304u);
    CHECK(r.str() == "ab");
    CHECK(r.done());
    canonical_reader truncated(std::span<const std::uint8_t>(w.data().data(), 3));
    CHECK_THROWS_AS(truncated.u32(), decode_error);
}

TEST_CASE("sign and verify round trip for both schemes")
{
    for (auto name : {"ed25519", "keyed-hash"}) {
        CAPTURE(name);
        fixture fx(name, 2);
        auto m = sha256("message");
        auto sig = sign(*fx.scheme, fx.keys[0], m);
        CHECK(verify(*fx.scheme, fx.keys[0].pub, m, sig));
        CHECK_FALSE(verify(*fx.scheme, fx.keys[1].pub, m, sig));
        CHECK_FALSE(verify(*fx.scheme, fx.keys[0].pub, sha256("other"), sig));
        auto flipped = sig;
        flipped.data[0] ^= 1;
        CHECK_FALSE(verify(*fx.scheme, fx.keys[0].pub, m, flipped));
    }
}

TEST_CASE("ed25519 keys are deterministic per seed")
{
    ed25519_scheme s;
    CHECK(s.generate(1, seed_for(1)).pub == s.generate(1, seed_for(1)).pub);
    CHECK_FALSE(s.generate(1, seed_for(1)).pub == s.generate(2, seed_for(2)).pub);
}

TEST_CASE("registry rejects one public key for two nodes")
{
    fixture fx("keyed-hash", 2);
    CHECK_THROWS_AS(fx.registry.add(9, fx.keys[0].pub), std::invalid_argument);
}

TEST_CASE("assemble_certificate with a reply quorum of three")
{
    fixture fx("ed25519");
    auto m = sha256("claim");
    std::vector<signature> sigs;
    for (int i = 0; i < 3; ++i) sigs.push_back(sign(*fx.scheme, fx.keys[i], m));

    SUBCASE("three valid signatures meet threshold three")
    {
        auto qc = assemble_certificate(m, sigs, 3, fx.registry);
        CHECK(qc.signatures.size() == 3);
        CHECK(qc.verify(fx.registry, {}));
    }
    SUBCASE("a forged signature is dropped")
    {
        sigs[2].data[5] ^= 0x40;
        try {
            assemble_certificate(m, sigs, 3, fx.registry);
            FAIL("expected insufficient_signatures");
        } catch (const insufficient_signatures& e) {
            CHECK(e.valid_count() == 2);
            CHECK(e.threshold() == 3);
        }
    }
    SUBCASE("a superset of signers is kept")
    {
        sigs.push_back(sign(*fx.scheme, fx.keys[3], m));
        sigs.push_back(sign(*fx.scheme, fx.keys[4], m));
        auto qc = assemble_certificate(m, sigs, 3, fx.registry);
        CHECK(qc.signatures.size() == 5);
    }
    SUBCASE("duplicates count once")
    {
        std::vector<signature> dup{sigs[0], sigs[0], sigs[0], sigs[1]};
        CHECK_THROWS_AS(assemble_certificate(m, dup, 3, fx.registry), insufficient_signatures);
    }
    SUBCASE("signers outside the member list are excluded")
    {
        std::vector<node_id> members{0, 1, 5};
        CHECK_THROWS_AS(assemble_certificate(m, sigs, 3, fx.registry, members), insufficient_signatures);
    }
}

TEST_CASE("certificate verification rejects tampering")
{
    fixture fx("keyed-hash");
    auto m = sha256("claim");
    std::vector<signature> sigs;
    for (int i = 0; i < 4; ++i) sigs.push_back(sign(*fx.scheme, fx.keys[i], m));
    auto qc = assemble_certificate(m, sigs, 3, fx.registry);
    CHECK(qc.verify(fx.registry, {}));

    auto other_digest = qc;
    other_digest.what = sha256("something else");
    CHECK_FALSE(other_digest.verify(fx.registry, {}));

    auto repeated = qc;
    repeated.signatures[1] = repeated.signatures[0];
    CHECK_FALSE(repeated.verify(fx.registry, {}));

    auto short_qc = qc;
    short_qc.signatures.resize(2);
    CHECK_FALSE(short_qc.verify(fx.registry, {}));
}

TEST_CASE("property: forged signatures never complete a certificate")
{
    fixture fx("keyed-hash");
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 300; ++trial) {
        auto m = sha256("trial-" + std::to_string(trial));
        std::uint32_t threshold = 1 + static_cast<std::uint32_t>(rng() % 5);
        std::vector<signature> sigs;
        std::size_t honest = 0;
        for (int i = 0; i < 7; ++i) {
            auto s = sign(*fx.scheme, fx.keys[i], m);
            if (rng() % 2) {
                s.data[rng() % s.data.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
            } else {
                ++honest;
            }
            sigs.push_back(s);
            if (rng() % 3 == 0) sigs.push_back(s); // duplicates
        }
        std::shuffle(sigs.begin(), sigs.end(), rng);
        bool assembled = true;
        try {
            auto qc = assemble_certificate(m, sigs, threshold, fx.registry);
            CHECK(qc.signatures.size() == honest);
            CHECK(qc.verify(fx.registry, {}));
        } catch (const insufficient_signatures& e) {
            assembled = false;
            CHECK(e.valid_count() == honest);
        }
        CHECK(assembled == (honest >= threshold));

        quorum_certificate raw{m, sigs, threshold};
        bool first = raw.verify(fx.registry, {});
        CHECK(first == raw.verify(fx.registry, {}));
        if (honest < threshold) CHECK_FALSE(first);
    }
}

TEST_CASE("property: certificate wire format round trips")
{
    fixture fx("ed25519", 5);
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        auto m = sha256("wire-" + std::to_string(trial));
        std::vector<signature> sigs;
        for (int i = 0; i < 5; ++i) {
            if (rng() % 4) sigs.push_back(sign(*fx.scheme, fx.keys[i], m));
        }
        if (sigs.empty()) continue;
        auto qc = assemble_certificate(m, sigs, 1, fx.registry);
        auto bytes = qc.encode();
        auto back = quorum_certificate::decode(bytes);
        CHECK(back == qc);
        CHECK(back.verify(fx.registry, {}));
        bytes.push_back(0);
        CHECK_THROWS_AS(quorum_certificate::decode(bytes), decode_error);
    }
}
