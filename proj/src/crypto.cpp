#include "transedge/crypto.hpp"

#include <sodium.h>

#include <algorithm>
#include <cstring>
#include <set>

namespace transedge::crypto {

namespace {

struct sodium_init_guard {
    sodium_init_guard()
    {
        if (sodium_init() < 0) {
            throw std::runtime_error("libsodium initialisation failed");
        }
    }
};

void ensure_sodium()
{
    static sodium_init_guard guard;
}

} // namespace

digest sha256(std::span<const std::uint8_t> data)
{
    ensure_sodium();
    digest out{};
    crypto_hash_sha256(out.data(), data.data(), data.size());
    return out;
}

digest sha256(std::string_view data)
{
    return sha256(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

std::string to_hex(std::span<const std::uint8_t> data)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (auto b : data) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xf]);
    }
    return out;
}

digest digest_from_hex(std::string_view hex)
{
    if (hex.size() != digest_size * 2) {
        throw decode_error("bad digest length");
    }
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw decode_error("bad hex digit");
    };
    digest out{};
    for (std::size_t i = 0; i < digest_size; ++i) {
        out[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
    }
    return out;
}

canonical_writer& canonical_writer::u8(std::uint8_t v)
{
    buf_.push_back(v);
    return *this;
}

canonical_writer& canonical_writer::u32(std::uint32_t v)
{
    std::uint8_t le[4];
    for (int i = 0; i < 4; ++i) le[i] = static_cast<std::uint8_t>(v >> (8 * i));
    buf_.insert(buf_.end(), le, le + 4);
    return *this;
}

canonical_writer& canonical_writer::u64(std::uint64_t v)
{
    std::uint8_t le[8];
    for (int i = 0; i < 8; ++i) le[i] = static_cast<std::uint8_t>(v >> (8 * i));
    buf_.insert(buf_.end(), le, le + 8);
    return *this;
}

canonical_writer& canonical_writer::i64(std::int64_t v)
{
    return u64(static_cast<std::uint64_t>(v));
}

canonical_writer& canonical_writer::raw(std::span<const std::uint8_t> data)
{
    buf_.insert(buf_.end(), data.begin(), data.end());
    return *this;
}

canonical_writer& canonical_writer::blob(std::span<const std::uint8_t> data)
{
    u32(static_cast<std::uint32_t>(data.size()));
    return raw(data);
}

canonical_writer& canonical_writer::str(std::string_view s)
{
    return blob(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

std::span<const std::uint8_t> canonical_reader::take(std::size_t n)
{
    if (data_.size() - pos_ < n) {
        throw decode_error("truncated input");
    }
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
}

std::uint8_t canonical_reader::u8()
{
    return take(1)[0];
}

std::uint32_t canonical_reader::u32()
{
    auto s = take(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | s[static_cast<std::size_t>(i)];
    return v;
}

std::uint64_t canonical_reader::u64()
{
    auto s = take(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | s[static_cast<std::size_t>(i)];
    return v;
}

bytes canonical_reader::blob()
{
    auto n = u32();
    auto s = take(n);
    return bytes(s.begin(), s.end());
}

std::string canonical_reader::str()
{
    auto b = blob();
    return std::string(b.begin(), b.end());
}

digest canonical_reader::hash()
{
    auto s = take(digest_size);
    digest d{};
    std::copy(s.begin(), s.end(), d.begin());
    return d;
}

node_key_pair ed25519_scheme::generate(node_id id, const digest& seed) const
{
    ensure_sodium();
    node_key_pair kp;
    kp.id = id;
    kp.pub.data.resize(crypto_sign_PUBLICKEYBYTES);
    kp.secret.data.resize(crypto_sign_SECRETKEYBYTES);
    crypto_sign_seed_keypair(kp.pub.data.data(), kp.secret.data.data(), seed.data());
    return kp;
}

bytes ed25519_scheme::sign_bytes(const secret_key& key, const digest& message) const
{
    if (key.data.size() != crypto_sign_SECRETKEYBYTES) {
        throw std::invalid_argument("bad ed25519 secret key");
    }
    bytes sig(crypto_sign_BYTES);
    crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), key.data.data());
    return sig;
}

bool ed25519_scheme::verify_bytes(const public_key& key, const digest& message, std::span<const std::uint8_t> sig) const
{
    if (key.data.size() != crypto_sign_PUBLICKEYBYTES || sig.size() != crypto_sign_BYTES) {
        return false;
    }
    return crypto_sign_verify_detached(sig.data(), message.data(), message.size(), key.data.data()) == 0;
}

node_key_pair keyed_hash_scheme::generate(node_id id, const digest& seed) const
{
    ensure_sodium();
    node_key_pair kp;
    kp.id = id;
    kp.secret.data.assign(seed.begin(), seed.end());
    kp.pub.data = kp.secret.data;
    return kp;
}

// Keyed BLAKE2b-256: several times cheaper than HMAC-SHA256 on short
// messages, which matters when a fuzz campaign signs millions of claims.
bytes keyed_hash_scheme::sign_bytes(const secret_key& key, const digest& message) const
{
    if (key.data.size() != crypto_generichash_KEYBYTES) throw std::invalid_argument("bad keyed-hash key");
    bytes mac(crypto_generichash_BYTES);
    crypto_generichash(mac.data(), mac.size(), message.data(), message.size(), key.data.data(), key.data.size());
    return mac;
}

bool keyed_hash_scheme::verify_bytes(const public_key& key, const digest& message, std::span<const std::uint8_t> sig) const
{
    if (key.data.size() != crypto_generichash_KEYBYTES || sig.size() != crypto_generichash_BYTES) return false;
    std::array<std::uint8_t, crypto_generichash_BYTES> mac{};
    crypto_generichash(mac.data(), mac.size(), message.data(), message.size(), key.data.data(), key.data.size());
    return sodium_memcmp(mac.data(), sig.data(), mac.size()) == 0;
}

std::shared_ptr<const signature_scheme> make_scheme(std::string_view name)
{
    if (name == "ed25519") return std::make_shared<ed25519_scheme>();
    if (name == "keyed-hash") return std::make_shared<keyed_hash_scheme>();
    throw std::invalid_argument("unknown signature scheme: " + std::string(name));
}

signature sign(const signature_scheme& scheme, const node_key_pair& key, const digest& message)
{
    return signature{key.id, scheme.sign_bytes(key.secret, message)};
}

bool verify(const signature_scheme& scheme, const public_key& key, const digest& message, const signature& sig)
{
    return scheme.verify_bytes(key, message, sig.data);
}

void key_registry::add(node_id id, public_key key)
{
    for (const auto& [other, pk] : keys_) {
        if (other != id && pk == key) {
            throw std::invalid_argument("public key already registered to node " + std::to_string(other));
        }
    }
    keys_[id] = std::move(key);
}

const public_key* key_registry::find(node_id id) const
{
    auto it = keys_.find(id);
    return it == keys_.end() ? nullptr : &it->second;
}

bool key_registry::verify(const digest& message, const signature& sig) const
{
    const auto* pk = find(sig.signer);
    return pk != nullptr && scheme_->verify_bytes(*pk, message, sig.data);
}

bool quorum_certificate::verify(const key_registry& keys, std::span<const node_id> signers) const
{
    if (signatures.size() < threshold || threshold == 0) {
        return false;
    }
    std::set<node_id> seen;
    for (const auto& sig : signatures) {
        if (!seen.insert(sig.signer).second) return false;
        if (!signers.empty() && std::find(signers.begin(), signers.end(), sig.signer) == signers.end()) return false;
        if (!keys.verify(what, sig)) return false;
    }
    return true;
}

bytes quorum_certificate::encode() const
{
    canonical_writer w;
    w.u8(0x51).hash(what).u32(threshold).u32(static_cast<std::uint32_t>(signatures.size()));
    for (const auto& sig : signatures) {
        w.u32(static_cast<std::uint32_t>(sig.signer)).blob(sig.data);
    }
    return w.data();
}

quorum_certificate quorum_certificate::decode(std::span<const std::uint8_t> data)
{
    canonical_reader r(data);
    if (r.u8() != 0x51) {
        throw decode_error("not a quorum certificate");
    }
    quorum_certificate qc;
    qc.what = r.hash();
    qc.threshold = r.u32();
    auto n = r.u32();
    if (n > data.size()) {
        throw decode_error("signature count exceeds input");
    }
    for (std::uint32_t i = 0; i < n; ++i) {
        signature sig;
        sig.signer = static_cast<node_id>(r.u32());
        sig.data = r.blob();
        qc.signatures.push_back(std::move(sig));
    }
    if (!r.done()) {
        throw decode_error("trailing bytes after certificate");
    }
    return qc;
}

insufficient_signatures::insufficient_signatures(std::size_t valid, std::uint32_t threshold)
    : std::runtime_error("insufficient signatures: " + std::to_string(valid) + " valid, " + std::to_string(threshold) + " required"),
      valid_(valid),
      threshold_(threshold)
{
}

quorum_certificate assemble_certificate(const digest& what,
                                        std::span<const signature> candidates,
                                        std::uint32_t threshold,
                                        const key_registry& keys,
                                        std::span<const node_id> signers)
{
    quorum_certificate qc;
    qc.what = what;
    qc.threshold = threshold;
    std::set<node_id> seen;
    for (const auto& sig : candidates) {
        if (seen.count(sig.signer)) continue;
        if (!signers.empty() && std::find(signers.begin(), signers.end(), sig.signer) == signers.end()) continue;
        if (!keys.verify(what, sig)) continue;
        seen.insert(sig.signer);
        qc.signatures.push_back(sig);
    }
    if (qc.signatures.size() < threshold) {
        throw insufficient_signatures(qc.signatures.size(), threshold);
    }
    std::sort(qc.signatures.begin(), qc.signatures.end(),
              [](const signature& a, const signature& b) { return a.signer < b.signer; });
    return qc;
}

} // namespace transedge::crypto
