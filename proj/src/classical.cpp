#include "qpc/classical.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <array>
#include <numeric>

namespace qpc {

namespace {

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

}  // namespace

std::string bits_to_string(std::span<const std::uint8_t> bits) {
    std::string s;
    s.reserve(bits.size());
    for (auto b : bits) s.push_back(b ? '1' : '0');
    return s;
}

BitString bits_from_string(std::string_view s) {
    BitString out;
    out.reserve(s.size());
    for (char c : s) {
        if (c != '0' && c != '1') throw std::invalid_argument("bit string may only contain 0 and 1");
        out.push_back(static_cast<std::uint8_t>(c - '0'));
    }
    return out;
}

std::vector<std::uint8_t> bytes_from_hex(std::string_view hex) {
    if (hex.starts_with("0x") || hex.starts_with("0X")) hex.remove_prefix(2);
    if (hex.size() % 2 != 0) throw ConfigError("hex byte string must have an even number of digits");
    std::vector<std::uint8_t> out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2) {
        const int hi = hex_value(hex[i]), lo = hex_value(hex[i + 1]);
        if (hi < 0 || lo < 0) throw ConfigError("invalid hex digit in '" + std::string(hex) + "'");
        out.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
    }
    return out;
}

std::string hex_from_bytes(std::span<const std::uint8_t> bytes) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string s;
    s.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        s.push_back(kDigits[b >> 4]);
        s.push_back(kDigits[b & 0xF]);
    }
    return s;
}

SecretInput SecretInput::from_hex(std::string_view hex, std::size_t bit_length) {
    if (bit_length == 0) throw ConfigError("bit_length must be positive");
    if (hex.starts_with("0x") || hex.starts_with("0X")) hex.remove_prefix(2);
    if (hex.empty()) throw ConfigError("empty hex input");
    BitString raw;
    raw.reserve(hex.size() * 4);
    for (char c : hex) {
        const int v = hex_value(c);
        if (v < 0) throw ConfigError("invalid hex digit in input '" + std::string(hex) + "'");
        for (int b = 3; b >= 0; --b) raw.push_back(static_cast<std::uint8_t>((v >> b) & 1));
    }
    SecretInput x;
    if (raw.size() >= bit_length) {
        const std::size_t excess = raw.size() - bit_length;
        for (std::size_t i = 0; i < excess; ++i)
            if (raw[i]) throw ConfigError("input 0x" + std::string(hex) + " does not fit in " +
                                          std::to_string(bit_length) + " bits");
        x.bits.assign(raw.begin() + static_cast<std::ptrdiff_t>(excess), raw.end());
    } else {
        x.bits.assign(bit_length - raw.size(), 0);
        x.bits.insert(x.bits.end(), raw.begin(), raw.end());
    }
    return x;
}

SecretInput SecretInput::from_uint(std::uint64_t value, std::size_t bit_length) {
    if (bit_length == 0) throw ConfigError("bit_length must be positive");
    if (bit_length < 64 && (value >> bit_length) != 0) throw ConfigError("value does not fit in bit_length bits");
    SecretInput x;
    x.bits.resize(bit_length);
    for (std::size_t i = 0; i < bit_length; ++i) {
        const std::size_t shift = bit_length - 1 - i;
        x.bits[i] = shift < 64 ? static_cast<std::uint8_t>((value >> shift) & 1u) : 0;
    }
    return x;
}

std::string SecretInput::to_hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    const std::size_t digits = (bits.size() + 3) / 4;
    const std::size_t pad = digits * 4 - bits.size();
    std::string s;
    s.reserve(digits);
    unsigned acc = 0;
    std::size_t n = pad;
    for (auto b : bits) {
        acc = acc << 1 | b;
        if (++n == 4) {
            s.push_back(kDigits[acc]);
            acc = 0;
            n = 0;
        }
    }
    return s;
}

void HashConfig::validate() const {
    if (key.empty()) throw ConfigError("--hash-key: hash key must not be empty");
    if (output_bits < 2) throw ConfigError("--hash-bits: hash output length N must be at least 2");
    if (output_bits > kMaxOutputBits)
        throw ConfigError("--hash-bits: hash output length " + std::to_string(output_bits) + " exceeds the " +
                          std::to_string(kMaxOutputBits) + "-bit primitive (no extension scheme)");
}

HashConfig HashConfig::from_hex_key(std::string_view hex, std::size_t output_bits) {
    HashConfig cfg{bytes_from_hex(hex), output_bits};
    cfg.validate();
    return cfg;
}

Digest hash_digest(const HashConfig& cfg, const SecretInput& input) {
    cfg.validate();
    const std::size_t len = input.length();
    std::vector<std::uint8_t> msg;
    msg.reserve(4 + (len + 7) / 8);
    for (int shift = 24; shift >= 0; shift -= 8) msg.push_back(static_cast<std::uint8_t>((len >> shift) & 0xFF));
    const std::size_t nbytes = (len + 7) / 8;
    const std::size_t lead = nbytes * 8 - len;
    std::vector<std::uint8_t> packed(nbytes, 0);
    for (std::size_t i = 0; i < len; ++i) {
        const std::size_t pos = lead + i;
        if (input.bits[i]) packed[pos / 8] |= static_cast<std::uint8_t>(0x80u >> (pos % 8));
    }
    msg.insert(msg.end(), packed.begin(), packed.end());

    std::array<unsigned char, EVP_MAX_MD_SIZE> mac{};
    unsigned int mac_len = 0;
    if (HMAC(EVP_sha256(), cfg.key.data(), static_cast<int>(cfg.key.size()), msg.data(), msg.size(), mac.data(),
             &mac_len) == nullptr)
        throw std::runtime_error("HMAC-SHA256 failed");

    Digest d;
    d.bits.resize(cfg.output_bits);
    for (std::size_t i = 0; i < cfg.output_bits; ++i) d.bits[i] = (mac[i / 8] >> (7 - i % 8)) & 1u;
    return d;
}

GroupSeq group_bits(std::span<const std::uint8_t> bits) {
    if (bits.empty()) throw std::invalid_argument("cannot group an empty bit string");
    GroupSeq g;
    g.padded = bits.size() % 2 == 1;
    g.groups.reserve(group_count(bits.size()));
    for (std::size_t i = 0; i < bits.size(); i += 2) {
        const unsigned hi = bits[i];
        const unsigned lo = i + 1 < bits.size() ? bits[i + 1] : 0u;
        g.groups.push_back(TwoBits::from_bits(hi, lo));
    }
    return g;
}

BitString ungroup(const GroupSeq& g) {
    BitString out;
    out.reserve(g.groups.size() * 2);
    for (TwoBits t : g.groups) {
        out.push_back(static_cast<std::uint8_t>(t.hi()));
        out.push_back(static_cast<std::uint8_t>(t.lo()));
    }
    if (g.padded && !out.empty()) out.pop_back();
    return out;
}

int total_score(std::span<const int> scores) {
    int total = 0;
    for (int s : scores) {
        if (s < 0 || s > 2) throw std::invalid_argument("group score outside {0,1,2}");
        total += s;
    }
    return total;
}

}  // namespace qpc
