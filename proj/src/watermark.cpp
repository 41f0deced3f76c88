#include "steg/watermark.hpp"

#include "steg/error.hpp"

#include <algorithm>
#include <numbers>

namespace steg {

double bit_score(Bit bit, Unit u) {
    constexpr double kLn2To64 = 64.0 * std::numbers::ln2;
    const std::uint64_t raw = u.raw();
    if (bit) {
        // -ln(raw / 2^64), raw clamped to at least 1
        return kLn2To64 - std::log(static_cast<double>(raw == 0 ? 1 : raw));
    }
    // -ln(1 - raw / 2^64); 2^64 - raw >= 1 always.
    if (raw < (std::uint64_t{1} << 63)) return -std::log1p(-std::ldexp(static_cast<double>(raw), -64));
    const std::uint64_t complement = ~raw + 1; // 2^64 - raw, raw != 0 here
    return kLn2To64 - std::log(static_cast<double>(complement));
}

double bit_score(Bit bit, double prf_value) {
    constexpr double lo = 0x1p-64;
    const double u = std::clamp(prf_value, lo, 1.0 - 0x1p-53);
    return bit ? -std::log(u) : -std::log1p(-u);
}

namespace {

class WatermarkSampling final : public SamplingPolicy {
public:
    WatermarkSampling(const Prf& prf, RandomSource& rng, double lambda) : prf_(prf), rng_(rng), lambda_(lambda) {}

    Draw draw(const BitSlot& slot) override {
        if (!keyed_) return {rng_.next_unit(), Phase::Entropy, false};
        return {(*keyed_)(slot.index, PrfSymbol::None), Phase::Mark, true};
    }

    void observe(const BitSlot& slot, Bit bit, double entropy) override {
        bits_.push_back(bit);
        if (keyed_) return;
        entropy_ += entropy;
        if (entropy_ >= lambda_) {
            boundary_ = slot.index + 1;
            keyed_ = prf_.bind(bits_);
        }
    }

    std::optional<std::size_t> boundary() const { return boundary_; }

private:
    const Prf& prf_;
    RandomSource& rng_;
    double lambda_;
    double entropy_ = 0.0;
    Bits bits_;
    std::unique_ptr<BoundPrf> keyed_;
    std::optional<std::size_t> boundary_;
};

} // namespace

Transcript wat_generate(const Prf& prf, Model& model, std::string_view prompt, int lambda_bits, RandomSource& rng) {
    if (lambda_bits < 1) throw ConfigError("lambda must be at least one bit");
    WatermarkSampling policy(prf, rng, static_cast<double>(lambda_bits));
    Transcript t = generate(model, prompt, policy);
    t.phase_boundary = policy.boundary();
    t.mark_end = std::nullopt;
    t.low_entropy = !policy.boundary().has_value();
    return t;
}

Transcript wat_generate(const SecretKey& key, Model& model, std::string_view prompt, int lambda_bits,
                        RandomSource& rng) {
    HmacPrf prf(key);
    return wat_generate(prf, model, prompt, lambda_bits, rng);
}

WatermarkVerdict wat_detect(const Prf& prf, BitSpan bits, int lambda_bits) {
    const std::size_t n = bits.size();
    const double lambda = static_cast<double>(lambda_bits);
    for (std::size_t split = 1; split < n; ++split) {
        auto keyed = prf.bind(bits.first(split));
        Score score;
        for (std::size_t j = split; j < n; ++j) score.add(bit_score(bits[j], (*keyed)(j, PrfSymbol::None)));
        if (score.exceeds(lambda)) return {true, split};
    }
    return {};
}

WatermarkVerdict wat_detect(const SecretKey& key, BitSpan bits, int lambda_bits) {
    HmacPrf prf(key);
    return wat_detect(prf, bits, lambda_bits);
}

} // namespace steg
