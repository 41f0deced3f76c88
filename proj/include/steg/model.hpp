#pragma once

// Language-model interface and its reduction to a binary token stream.
//
// Each vocabulary token is written as a fixed-width big-endian bit string
// of W = ceil(log2 |T|) bits and sampled bit-by-bit from conditional
// probabilities. Bit patterns at or above |T| carry zero mass, so the
// reduction reproduces the token distribution exactly.

#include "steg/bits.hpp"
#include "steg/keyed_randomness.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace steg {

using TokenId = std::uint32_t;

struct TokenDistribution {
    std::vector<double> probs;

    /// Throws ProtocolError unless entries are non-negative, sum to 1
    /// within 1e-6 and the dimension equals `vocab_size`.
    void validate(std::size_t vocab_size) const;
};

struct BitDistribution {
    double p_one = 0.0;
};

/// Def. of a model: a deterministic map from (prompt, generated tokens) to
/// a next-token distribution.
class Model {
public:
    virtual ~Model() = default;

    virtual std::size_t vocab_size() const = 0;
    virtual std::optional<TokenId> done_token() const { return std::nullopt; }
    virtual std::optional<std::size_t> max_len() const { return std::nullopt; }

    virtual TokenDistribution next_token_dist(std::string_view prompt, std::span<const TokenId> generated) = 0;

    /// Called at the start of every generation; clears per-session caches.
    virtual void begin_session() {}

    /// Text rendering when the model has a tokenizer.
    virtual std::optional<std::string> detokenize(std::span<const TokenId> /*tokens*/) { return std::nullopt; }

    /// Digest of the configuration that produced this model; empty if unknown.
    virtual std::string config_digest() const { return {}; }
};

/// W = ceil(log2 vocab). Throws ConfigError for vocab < 2.
std::size_t token_width(std::size_t vocab_size);

/// Probability that the next bit is 1 given the bits already emitted for
/// the current token. Throws InvalidPrefix on a zero-mass prefix.
BitDistribution bit_conditional(const TokenDistribution& dist, BitSpan bit_prefix);

struct SampledBit {
    Bit bit = 0;
    double entropy = 0.0; // -log2 of the chosen branch
};

/// bit = 1 iff u <= p_one. Throws ImpossibleSample if the chosen branch has probability 0.
SampledBit sample_bit(BitDistribution dist, Unit u);
SampledBit sample_bit(BitDistribution dist, double rng_value);

Bits tokens_to_bits(std::span<const TokenId> tokens, std::size_t width);
std::vector<TokenId> bits_to_tokens(BitSpan bits, std::size_t width);

/// Per-bit empirical entropies (bits) with running totals.
class EntropyLedger {
public:
    void append(double entropy);
    std::span<const double> per_bit() const { return per_bit_; }
    std::span<const double> cumulative() const { return cumulative_; }
    double total() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
    std::size_t size() const { return per_bit_.size(); }

private:
    std::vector<double> per_bit_;
    std::vector<double> cumulative_;
};

} // namespace steg
