#pragma once

// Single-key watermark: after lambda bits of empirical entropy have been
// spent with true randomness, every further bit is x_i = [F_k(r, i) <= p_i].
// The per-bit score ln(1/v) is Exp(1) for key-independent text and has
// mean 1 + ln(2) H(p_i) for watermarked bits.

#include "steg/keyed_randomness.hpp"
#include "steg/model.hpp"
#include "steg/transcript.hpp"

#include <cmath>
#include <optional>

namespace steg {

/// ln(1/u) for a 1-bit, ln(1/(1-u)) for a 0-bit, in nats. u is clamped to
/// [2^-64, 1 - 2^-64].
double bit_score(Bit bit, Unit u);
double bit_score(Bit bit, double prf_value);

/// Running sum of bit scores.
struct Score {
    double total = 0.0;
    std::size_t length = 0;

    void add(double s) {
        total += s;
        ++length;
    }
    /// (total - length) / sqrt(length); requires length >= 1.
    double normalized() const { return (total - static_cast<double>(length)) / std::sqrt(static_cast<double>(length)); }
    /// total - length > lambda * sqrt(length)
    bool exceeds(double lambda) const {
        return total - static_cast<double>(length) > lambda * std::sqrt(static_cast<double>(length));
    }
};

struct WatermarkVerdict {
    bool detected = false;
    std::optional<std::size_t> split_index; // length of the prefix r that fired
};

/// Low-entropy responses come back with `low_entropy` set and no keyed bits.
Transcript wat_generate(const Prf& prf, Model& model, std::string_view prompt, int lambda_bits, RandomSource& rng);
Transcript wat_generate(const SecretKey& key, Model& model, std::string_view prompt, int lambda_bits,
                        RandomSource& rng);

/// Tries every split 1 <= i < L; O(L^2) PRF calls.
WatermarkVerdict wat_detect(const Prf& prf, BitSpan bits, int lambda_bits);
WatermarkVerdict wat_detect(const SecretKey& key, BitSpan bits, int lambda_bits);

} // namespace steg
