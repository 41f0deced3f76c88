#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace steg {

/// A single binary token; always 0 or 1.
using Bit = std::uint8_t;
using Bits = std::vector<Bit>;
using BitSpan = std::span<const Bit>;

/// "0110..." rendering.
std::string bits_to_string(BitSpan bits);

/// Parses a string of '0'/'1' characters. Throws EncodingError otherwise.
Bits bits_from_string(std::string_view text);

/// MSB-first expansion of bytes.
Bits bytes_to_bits(std::span<const std::uint8_t> bytes);

/// MSB-first packing; the final byte is zero padded.
std::vector<std::uint8_t> pack_bits(BitSpan bits);

std::string to_hex(std::span<const std::uint8_t> bytes);

/// Accepts upper or lower case, optional "0x" prefix, surrounding whitespace.
std::vector<std::uint8_t> from_hex(std::string_view hex);

/// Length of the longest common prefix.
std::size_t common_prefix(BitSpan a, BitSpan b);

} // namespace steg
