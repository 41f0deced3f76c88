#pragma once

// Payload embedding and retrieval on top of the watermark and the dynamic
// feedback code.
//
// The response is cut into chunks by the scores themselves: after every
// scored bit, the retriever adds s(x_i, F(r, i, sigma)) to one running score
// per code symbol sigma, and the first sigma whose normalized score exceeds
// the threshold t is appended to the received code; all scores then restart.
// The generator runs the exact same receiver alongside sampling, so it
// always knows what has been received (noiseless feedback) and picks the
// next symbol to send with the feedback code.
//
// The full scheme prepends two phases: true randomness until lambda bits of
// entropy fix the prefix r, then a payload-independent watermark keyed on r
// until its score exceeds lambda * sqrt(len), which lets the retriever find r.

#include "steg/dynamic_ecc.hpp"
#include "steg/keyed_randomness.hpp"
#include "steg/model.hpp"
#include "steg/transcript.hpp"
#include "steg/watermark.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <optional>

namespace steg {

/// Bits examined while verifying one candidate prefix, per bit of lambda.
inline constexpr std::size_t kMarkVerifyBitsPerLambda = 64;

struct StegConfig {
    int lambda_bits = 16;
    double threshold_t = 2.0;
    /// Documentation only; the feedback code needs no margin at encode time.
    double epsilon = 0.25;
    /// Only the first m bits of every token are keyed on the code symbol and scored.
    std::optional<std::size_t> scored_bits_per_token;
    /// Retrieval stops once this many payload bits are decoded.
    std::optional<std::size_t> max_payload_bits;

    /// Throws ConfigError.
    void validate(std::size_t token_width) const;

    static StegConfig from_json(const nlohmann::json& j);
    static StegConfig load(const std::filesystem::path& path);
    nlohmann::json to_json() const;
};

PrfSymbol prf_symbol(CodeSymbol s);

/// Per-symbol running scores of the current chunk.
class ScoreState {
public:
    explicit ScoreState(double threshold) : threshold_(threshold) {}

    /// Adds one bit. `prf_for(sigma)` must return F(r, i, sigma). Symbols are
    /// visited in the order 0, 1, <-; the first crossing wins, resets every
    /// score and is returned.
    template <typename PrfFor>
    std::optional<CodeSymbol> update(Bit bit, PrfFor&& prf_for) {
        ++length_;
        const double len = static_cast<double>(length_);
        for (CodeSymbol sigma : kCodeSymbols) {
            auto& score = scores_[static_cast<std::size_t>(sigma)];
            score += bit_score(bit, prf_for(sigma));
            if ((score - len) / std::sqrt(len) > threshold_) {
                reset();
                return sigma;
            }
        }
        return std::nullopt;
    }

    void reset() {
        scores_.fill(0.0);
        length_ = 0;
    }

    double score(CodeSymbol s) const { return scores_[static_cast<std::size_t>(s)]; }
    std::size_t length() const { return length_; }
    double threshold() const { return threshold_; }

private:
    double threshold_;
    std::array<double, 3> scores_{};
    std::size_t length_ = 0;
};

/// The retriever's chunk decoder. The generator drives an identical instance.
class PayloadReceiver {
public:
    PayloadReceiver(const BoundPrf& prf, const StegConfig& config, std::size_t token_width);

    bool scored(std::size_t index) const { return index % token_width_ < scored_bits_; }

    /// Processes response bit `index`. `known` may carry an already computed
    /// F(r, index, sigma) to save one evaluation.
    std::optional<CodeSymbol> observe(std::size_t index, Bit bit,
                                      std::optional<std::pair<CodeSymbol, Unit>> known = std::nullopt);

    const std::vector<CodeSymbol>& code() const { return decoder_.received(); }
    const std::vector<std::size_t>& positions() const { return positions_; }
    const Bits& decoded() const { return decoder_.decoded(); }
    const ScoreState& scores() const { return scores_; }

private:
    const BoundPrf& prf_;
    ScoreState scores_;
    std::size_t token_width_;
    std::size_t scored_bits_;
    EccState decoder_; // empty message; only its incremental decode is used
    std::vector<std::size_t> positions_;
};

struct Retrieval {
    Bits payload; // decode(code)
    std::vector<CodeSymbol> code;
    std::vector<std::size_t> code_positions;
    std::size_t prefix_length = 0; // length of r; 0 for the one-query scheme
    std::size_t payload_start = 0; // first bit of the payload phase
};

/// One-query scheme. Undetectable for a single response per key.
Transcript steg_generate_one(const Prf& prf, Model& model, std::string_view prompt, BitSpan payload,
                             const StegConfig& config);
Retrieval steg_retrieve_one(const Prf& prf, BitSpan bits, const StegConfig& config, std::size_t token_width = 1);

/// Full scheme. `rng` supplies the true randomness of the entropy phase.
Transcript steg_generate(const Prf& prf, Model& model, std::string_view prompt, BitSpan payload,
                         const StegConfig& config, RandomSource& rng);
/// Tries every prefix r = bits[:j] in ascending j; returns the first whose
/// mark verifies and whose payload phase decodes to a non-empty bit string.
std::optional<Retrieval> steg_retrieve(const Prf& prf, BitSpan bits, const StegConfig& config,
                                       std::size_t token_width = 1);

struct SaturationResult {
    bool saturated = true;
    /// First violating window as (1-based start, length), by length then start.
    std::optional<std::pair<std::size_t, std::size_t>> first_violation;
};

/// True iff every window of length r >= r0 sums to at least 10 sqrt(r) ln r.
SaturationResult saturation_check(std::span<const double> entropies, std::size_t r0);

// Payload framing: 16-bit big-endian payload bit count, then the payload bits.

inline constexpr std::size_t kFrameHeaderBits = 16;

/// Throws EncodingError for payloads over 65535 bits.
Bits frame_payload(std::span<const std::uint8_t> bytes);
Bits frame_bits(BitSpan payload);

struct Unframed {
    enum class Status { None, Partial, Full };
    Status status = Status::None;
    std::size_t declared_bits = 0;
    Bits payload_bits; // recovered payload bits, at most declared_bits
    std::vector<std::uint8_t> bytes() const { return pack_bits(payload_bits); }
};

Unframed unframe(BitSpan bits);

} // namespace steg
