#include "steg/model.hpp"

#include "steg/error.hpp"

#include <algorithm>
#include <cmath>

namespace steg {

void TokenDistribution::validate(std::size_t vocab_size) const {
    if (probs.size() != vocab_size) {
        throw ProtocolError("distribution has " + std::to_string(probs.size()) + " entries, vocabulary has " +
                            std::to_string(vocab_size));
    }
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw ProtocolError("distribution has a negative or non-finite entry");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
        throw ProtocolError("distribution sums to " + std::to_string(sum));
    }
}

std::size_t token_width(std::size_t vocab_size) {
    if (vocab_size < 2) throw ConfigError("vocabulary needs at least two tokens");
    std::size_t w = 0;
    while ((std::size_t{1} << w) < vocab_size) ++w;
    return w;
}

BitDistribution bit_conditional(const TokenDistribution& dist, BitSpan bit_prefix) {
    const std::size_t vocab = dist.probs.size();
    const std::size_t width = token_width(vocab);
    if (bit_prefix.size() >= width) throw InvalidPrefix("bit prefix is as long as a whole token");

    // Ids sharing the prefix form the contiguous range [lo, lo + 2^(width - len)).
    std::size_t lo = 0;
    for (Bit b : bit_prefix) lo = (lo << 1) | b;
    const std::size_t rest = width - bit_prefix.size();
    lo <<= rest;
    const std::size_t half = std::size_t{1} << (rest - 1);

    double zero_mass = 0.0;
    double one_mass = 0.0;
    for (std::size_t id = lo; id < lo + half && id < vocab; ++id) zero_mass += dist.probs[id];
    for (std::size_t id = lo + half; id < lo + 2 * half && id < vocab; ++id) one_mass += dist.probs[id];

    const double total = zero_mass + one_mass;
    if (!(total > 0.0)) throw InvalidPrefix("bit prefix " + bits_to_string(bit_prefix) + " has zero mass");
    if (zero_mass == 0.0) return {1.0};
    if (one_mass == 0.0) return {0.0};
    return {std::clamp(one_mass / total, 0.0, 1.0)};
}

SampledBit sample_bit(BitDistribution dist, Unit u) {
    // u <= p, except that a zero-mass branch is never taken (u = 0, p = 0).
    const bool one = dist.p_one > 0.0 && unit_at_most(u, dist.p_one);
    const double p = one ? dist.p_one : 1.0 - dist.p_one;
    if (!(p > 0.0) || !(p <= 1.0)) throw ImpossibleSample("sampled a branch of probability zero");
    return {static_cast<Bit>(one ? 1 : 0), -std::log2(p)};
}

SampledBit sample_bit(BitDistribution dist, double rng_value) { return sample_bit(dist, Unit::from_real(rng_value)); }

Bits tokens_to_bits(std::span<const TokenId> tokens, std::size_t width) {
    Bits out;
    out.reserve(tokens.size() * width);
    for (TokenId t : tokens) {
        if (width < 32 && (static_cast<std::uint64_t>(t) >> width) != 0) {
            throw EncodingError("token id " + std::to_string(t) + " does not fit in " + std::to_string(width) +
                                " bits");
        }
        for (std::size_t k = width; k-- > 0;) out.push_back(static_cast<Bit>((t >> k) & 1U));
    }
    return out;
}

std::vector<TokenId> bits_to_tokens(BitSpan bits, std::size_t width) {
    if (width == 0 || bits.size() % width != 0) {
        throw EncodingError("bit count " + std::to_string(bits.size()) + " is not a multiple of token width");
    }
    std::vector<TokenId> out;
    out.reserve(bits.size() / width);
    for (std::size_t i = 0; i < bits.size(); i += width) {
        TokenId t = 0;
        for (std::size_t k = 0; k < width; ++k) t = (t << 1) | bits[i + k];
        out.push_back(t);
    }
    return out;
}

void EntropyLedger::append(double entropy) {
    if (!(entropy >= 0.0)) throw ConfigError("empirical entropy must be non-negative");
    per_bit_.push_back(entropy);
    cumulative_.push_back(total() + entropy);
}

} // namespace steg
