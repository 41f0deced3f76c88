#include "steg/bits.hpp"

#include "steg/error.hpp"

#include <algorithm>
#include <cctype>

namespace steg {

std::string bits_to_string(BitSpan bits) {
    std::string out;
    out.reserve(bits.size());
    for (Bit b : bits) out.push_back(b ? '1' : '0');
    return out;
}

Bits bits_from_string(std::string_view text) {
    Bits out;
    out.reserve(text.size());
    for (char c : text) {
        if (c == '0' || c == '1') {
            out.push_back(static_cast<Bit>(c - '0'));
        } else {
            throw EncodingError(std::string("invalid bit character '") + c + "'");
        }
    }
    return out;
}

Bits bytes_to_bits(std::span<const std::uint8_t> bytes) {
    Bits out;
    out.reserve(bytes.size() * 8);
    for (std::uint8_t byte : bytes) {
        for (int shift = 7; shift >= 0; --shift) out.push_back((byte >> shift) & 1U);
    }
    return out;
}

std::vector<std::uint8_t> pack_bits(BitSpan bits) {
    std::vector<std::uint8_t> out((bits.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i]) out[i / 8] |= static_cast<std::uint8_t>(0x80U >> (i % 8));
    }
    return out;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (std::uint8_t b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0F]);
    }
    return out;
}

namespace {

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

} // namespace

std::vector<std::uint8_t> from_hex(std::string_view hex) {
    while (!hex.empty() && std::isspace(static_cast<unsigned char>(hex.front()))) hex.remove_prefix(1);
    while (!hex.empty() && std::isspace(static_cast<unsigned char>(hex.back()))) hex.remove_suffix(1);
    if (hex.size() >= 2 && hex[0] == '0' && (hex[1] == 'x' || hex[1] == 'X')) hex.remove_prefix(2);
    if (hex.size() % 2 != 0) throw EncodingError("hex string has odd length");
    std::vector<std::uint8_t> out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2) {
        int hi = hex_value(hex[i]);
        int lo = hex_value(hex[i + 1]);
        if (hi < 0 || lo < 0) throw EncodingError("invalid hex digit");
        out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
    }
    return out;
}

std::size_t common_prefix(BitSpan a, BitSpan b) {
    auto [ia, ib] = std::mismatch(a.begin(), a.end(), b.begin(), b.end());
    return static_cast<std::size_t>(ia - a.begin());
}

} // namespace steg
