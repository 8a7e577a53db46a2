#pragma once

#include "transedge/types.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace transedge::crypto {

inline constexpr std::size_t digest_size = 32;
using digest = std::array<std::uint8_t, digest_size>;
using bytes = std::vector<std::uint8_t>;

digest sha256(std::span<const std::uint8_t> data);
digest sha256(std::string_view data);
std::string to_hex(std::span<const std::uint8_t> data);
digest digest_from_hex(std::string_view hex);

/// Canonical serialization: little-endian fixed-width integers,
/// u32-length-prefixed byte strings, fields written in declaration order.
class canonical_writer {
public:
    canonical_writer& u8(std::uint8_t v);
    canonical_writer& u32(std::uint32_t v);
    canonical_writer& u64(std::uint64_t v);
    canonical_writer& i64(std::int64_t v);
    canonical_writer& boolean(bool v) { return u8(v ? 1 : 0); }
    canonical_writer& raw(std::span<const std::uint8_t> data);
    canonical_writer& blob(std::span<const std::uint8_t> data);
    canonical_writer& str(std::string_view s);
    canonical_writer& hash(const digest& d) { return raw(d); }

    const bytes& data() const { return buf_; }
    digest finish() const { return sha256(buf_); }

private:
    bytes buf_;
};

class decode_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class canonical_reader {
public:
    explicit canonical_reader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    bytes blob();
    std::string str();
    digest hash();
    bool done() const { return pos_ == data_.size(); }

private:
    std::span<const std::uint8_t> take(std::size_t n);

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

struct public_key {
    bytes data;
    friend bool operator==(const public_key&, const public_key&) = default;
};

struct secret_key {
    bytes data;
};

struct node_key_pair {
    node_id id = -1;
    public_key pub;
    secret_key secret;
};

struct signature {
    node_id signer = -1;
    bytes data;
    friend bool operator==(const signature&, const signature&) = default;
};

/// Pluggable signing backend. Implementations are stateless after
/// construction and safe for concurrent use.
class signature_scheme {
public:
    virtual ~signature_scheme() = default;
    virtual std::string_view name() const = 0;
    virtual node_key_pair generate(node_id id, const digest& seed) const = 0;
    virtual bytes sign_bytes(const secret_key& key, const digest& message) const = 0;
    virtual bool verify_bytes(const public_key& key, const digest& message, std::span<const std::uint8_t> sig) const = 0;
};

/// Ed25519 through libsodium.
class ed25519_scheme final : public signature_scheme {
public:
    std::string_view name() const override { return "ed25519"; }
    node_key_pair generate(node_id id, const digest& seed) const override;
    bytes sign_bytes(const secret_key& key, const digest& message) const override;
    bool verify_bytes(const public_key& key, const digest& message, std::span<const std::uint8_t> sig) const override;
};

/// Keyed-BLAKE2b stand-in for simulation runs. The "public" key is the MAC
/// key itself, so it is only meaningful inside a single trusted process.
class keyed_hash_scheme final : public signature_scheme {
public:
    std::string_view name() const override { return "keyed-hash"; }
    node_key_pair generate(node_id id, const digest& seed) const override;
    bytes sign_bytes(const secret_key& key, const digest& message) const override;
    bool verify_bytes(const public_key& key, const digest& message, std::span<const std::uint8_t> sig) const override;
};

std::shared_ptr<const signature_scheme> make_scheme(std::string_view name);

signature sign(const signature_scheme& scheme, const node_key_pair& key, const digest& message);
bool verify(const signature_scheme& scheme, const public_key& key, const digest& message, const signature& sig);

/// Public keys of every node in a deployment.
class key_registry {
public:
    explicit key_registry(std::shared_ptr<const signature_scheme> scheme) : scheme_(std::move(scheme)) {}

    void add(node_id id, public_key key);
    const public_key* find(node_id id) const;
    bool verify(const digest& message, const signature& sig) const;
    const signature_scheme& scheme() const { return *scheme_; }
    std::shared_ptr<const signature_scheme> scheme_ptr() const { return scheme_; }

private:
    std::shared_ptr<const signature_scheme> scheme_;
    std::map<node_id, public_key> keys_;
};

/// A set of distinct signatures over one digest meeting a threshold.
struct quorum_certificate {
    digest what{};
    std::vector<signature> signatures; // sorted by signer
    std::uint32_t threshold = 0;

    bool empty() const { return signatures.empty(); }

    /// Every signer distinct and a member of `signers`, every signature
    /// valid over `what`, and at least `threshold` of them.
    bool verify(const key_registry& keys, std::span<const node_id> signers) const;

    bytes encode() const;
    static quorum_certificate decode(std::span<const std::uint8_t> data);

    friend bool operator==(const quorum_certificate&, const quorum_certificate&) = default;
};

class insufficient_signatures : public std::runtime_error {
public:
    insufficient_signatures(std::size_t valid, std::uint32_t threshold);
    std::size_t valid_count() const { return valid_; }
    std::uint32_t threshold() const { return threshold_; }

private:
    std::size_t valid_;
    std::uint32_t threshold_;
};

/// Drops invalid, duplicate and non-member signatures, then requires
/// `threshold` survivors. An empty `signers` span accepts any registered key.
quorum_certificate assemble_certificate(const digest& what,
                                        std::span<const signature> candidates,
                                        std::uint32_t threshold,
                                        const key_registry& keys,
                                        std::span<const node_id> signers = {});

} // namespace transedge::crypto
