#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qpc/bell.hpp"

namespace qpc {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bits stored most-significant first: bits[0] is b_{n-1}.
using BitString = std::vector<std::uint8_t>;

std::string bits_to_string(std::span<const std::uint8_t> bits);
BitString bits_from_string(std::string_view s);

/// A user's secret integer as an L-bit string (x_{L-1} ... x_0).
struct SecretInput {
    BitString bits;

    std::size_t length() const { return bits.size(); }

    /// Hex value with an explicit bit length; leading zeros are significant.
    /// Throws ConfigError if the value does not fit in `bit_length` bits.
    static SecretInput from_hex(std::string_view hex, std::size_t bit_length);
    static SecretInput from_uint(std::uint64_t value, std::size_t bit_length);
    /// Lowercase hex, ceil(L/4) digits.
    std::string to_hex() const;

    friend bool operator==(const SecretInput&, const SecretInput&) = default;
};

struct Digest {
    BitString bits;

    std::size_t length() const { return bits.size(); }
    friend bool operator==(const Digest&, const Digest&) = default;
};

struct HashConfig {
    std::vector<std::uint8_t> key;
    std::size_t output_bits = 128;

    static constexpr std::size_t kMaxOutputBits = 256;
    static constexpr std::string_view kPrimitive = "hmac-sha256-trunc";

    /// Throws ConfigError when the key is empty or N is outside [2, 256].
    void validate() const;
    static HashConfig from_hex_key(std::string_view hex, std::size_t output_bits);
};

std::vector<std::uint8_t> bytes_from_hex(std::string_view hex);
std::string hex_from_bytes(std::span<const std::uint8_t> bytes);

/// HMAC-SHA256 keyed with cfg.key over (L as 4 big-endian bytes || the input
/// packed big-endian into ceil(L/8) bytes), truncated to the leading N bits.
Digest hash_digest(const HashConfig& cfg, const SecretInput& input);

/// Two-bit groups, most significant pair first. An odd-length string gets a
/// 0 appended in the low slot of the last group.
struct GroupSeq {
    std::vector<TwoBits> groups;
    bool padded = false;

    std::size_t size() const { return groups.size(); }
    std::size_t bit_length() const { return groups.size() * 2 - (padded ? 1 : 0); }
    friend bool operator==(const GroupSeq&, const GroupSeq&) = default;
};

GroupSeq group_bits(std::span<const std::uint8_t> bits);
inline GroupSeq group_bits(const Digest& d) { return group_bits(d.bits); }
inline GroupSeq group_bits(const SecretInput& x) { return group_bits(x.bits); }
/// Inverse of group_bits (drops the pad bit).
BitString ungroup(const GroupSeq& g);

constexpr std::size_t group_count(std::size_t bit_length) { return (bit_length + 1) / 2; }

/// R (+) G: a group masked with a Bell-code one-time pad.
constexpr TwoBits mask(TwoBits group, BellCode code) { return TwoBits(group.value() ^ code.value()); }

/// (r1 (+) t1) + (r2 (+) t2).
constexpr int group_score(TwoBits r, BellCode t) {
    return static_cast<int>((r.hi() ^ t.hi()) + (r.lo() ^ t.lo()));
}

/// Sum of per-group scores; each must be in {0,1,2}.
int total_score(std::span<const int> scores);

}  // namespace qpc
