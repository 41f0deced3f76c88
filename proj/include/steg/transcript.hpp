#pragma once

// Generated responses with per-bit metadata, and the bit-level sampling
// loop shared by plain sampling, the watermark and the steganography scheme.

#include "steg/bits.hpp"
#include "steg/dynamic_ecc.hpp"
#include "steg/keyed_randomness.hpp"
#include "steg/model.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace steg {

enum class Phase : std::uint8_t {
    Plain,   // ordinary sampling
    Entropy, // true randomness until lambda bits of entropy are collected
    Mark,    // keyed, payload-independent; signals the prefix to the detector
    Payload, // keyed on the code symbol currently transmitted
};

std::string to_string(Phase p);
Phase phase_from_string(std::string_view s);

struct BitRecord {
    double p_one = 0.0;
    double entropy = 0.0;
    Unit draw;          // uniform that decided the bit
    Phase phase = Phase::Plain;
    bool keyed = false; // draw came from the PRF
};

struct Transcript {
    std::vector<TokenId> tokens;
    std::size_t token_width = 1;
    Bits bits;
    std::vector<BitRecord> per_bit;

    /// Length of the true-randomness prefix r, once set.
    std::optional<std::size_t> phase_boundary;
    /// First bit of the payload phase, once reached.
    std::optional<std::size_t> mark_end;

    std::vector<CodeSymbol> code;
    std::vector<std::size_t> code_positions; // bit index at which each symbol fired

    bool low_entropy = false;
    bool ended_by_done = false;
    std::string model_config_digest;

    std::vector<double> entropies() const;
    double total_entropy() const;
};

/// `debug` adds the keyed draws, which leak key-dependent values.
nlohmann::json to_json(const Transcript& t, bool debug = false);
Transcript transcript_from_json(const nlohmann::json& j);

struct BitSlot {
    std::size_t index = 0;        // absolute bit position in the response
    std::size_t bit_in_token = 0; // position inside the current token
    double p_one = 0.0;
};

struct Draw {
    Unit value;
    Phase phase = Phase::Plain;
    bool keyed = false;
};

/// Decides the uniform for every bit and watches the outcome.
class SamplingPolicy {
public:
    virtual ~SamplingPolicy() = default;
    virtual Draw draw(const BitSlot& slot) = 0;
    virtual void observe(const BitSlot& /*slot*/, Bit /*bit*/, double /*entropy*/) {}
};

/// Samples tokens bit by bit until the done token or the model's length cap.
/// Without either, `hard_cap` tokens bound the loop (ConfigError if 0).
Transcript generate(Model& model, std::string_view prompt, SamplingPolicy& policy, std::size_t hard_cap = 0);

/// Ordinary sampling from the model with the given randomness.
class PlainSampling final : public SamplingPolicy {
public:
    explicit PlainSampling(RandomSource& rng) : rng_(rng) {}
    Draw draw(const BitSlot&) override { return {rng_.next_unit(), Phase::Plain, false}; }

private:
    RandomSource& rng_;
};

Transcript sample_plain(Model& model, std::string_view prompt, RandomSource& rng);

} // namespace steg
