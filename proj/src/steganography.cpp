#include "steg/steganography.hpp"

#include "steg/error.hpp"

#include <cmath>
#include <fstream>

namespace steg {

void StegConfig::validate(std::size_t token_width) const {
    if (lambda_bits < 1) throw ConfigError("lambda_bits must be positive");
    if (!(threshold_t > 0.0)) throw ConfigError("threshold_t must be positive");
    if (!(epsilon >= 0.0 && epsilon < 0.5)) throw ConfigError("epsilon must lie in [0, 1/2)");
    if (scored_bits_per_token && (*scored_bits_per_token < 1 || *scored_bits_per_token > token_width)) {
        throw ConfigError("scored_bits_per_token must lie in [1, " + std::to_string(token_width) + "]");
    }
}

StegConfig StegConfig::from_json(const nlohmann::json& j) {
    try {
        StegConfig c;
        c.lambda_bits = j.value("lambda_bits", c.lambda_bits);
        c.threshold_t = j.value("threshold_t", c.threshold_t);
        c.epsilon = j.value("epsilon", c.epsilon);
        if (j.contains("scored_bits_per_token") && !j.at("scored_bits_per_token").is_null()) {
            c.scored_bits_per_token = j.at("scored_bits_per_token").get<std::size_t>();
        }
        if (j.contains("max_payload_bits") && !j.at("max_payload_bits").is_null()) {
            c.max_payload_bits = j.at("max_payload_bits").get<std::size_t>();
        }
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed steg config: ") + e.what());
    }
}

StegConfig StegConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read steg config " + path.string());
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("steg config " + path.string() + " is not JSON: " + e.what());
    }
}

nlohmann::json StegConfig::to_json() const {
    return nlohmann::json{
        {"lambda_bits", lambda_bits},
        {"threshold_t", threshold_t},
        {"epsilon", epsilon},
        {"scored_bits_per_token",
         scored_bits_per_token ? nlohmann::json(*scored_bits_per_token) : nlohmann::json(nullptr)},
        {"max_payload_bits", max_payload_bits ? nlohmann::json(*max_payload_bits) : nlohmann::json(nullptr)},
    };
}

PrfSymbol prf_symbol(CodeSymbol s) {
    switch (s) {
    case CodeSymbol::Zero: return PrfSymbol::Zero;
    case CodeSymbol::One: return PrfSymbol::One;
    case CodeSymbol::Back: return PrfSymbol::Back;
    }
    return PrfSymbol::None;
}

// ---------------------------------------------------------------------------

PayloadReceiver::PayloadReceiver(const BoundPrf& prf, const StegConfig& config, std::size_t token_width)
    : prf_(prf),
      scores_(config.threshold_t),
      token_width_(token_width),
      scored_bits_(config.scored_bits_per_token.value_or(token_width)) {
    if (token_width == 0) throw ConfigError("token width must be positive");
}

std::optional<CodeSymbol> PayloadReceiver::observe(std::size_t index, Bit bit,
                                                   std::optional<std::pair<CodeSymbol, Unit>> known) {
    if (!scored(index)) return std::nullopt;
    auto fired = scores_.update(bit, [&](CodeSymbol sigma) {
        if (known && known->first == sigma) return known->second;
        return prf_(index, prf_symbol(sigma));
    });
    if (fired) {
        decoder_.push(*fired);
        positions_.push_back(index);
    }
    return fired;
}

namespace {

/// Sender half of the payload phase: keys each scored bit on the next code
/// symbol and feeds the emulated receiver's output back into the code state.
class PayloadTransmitter {
public:
    PayloadTransmitter(const BoundPrf& prf, BitSpan payload, const StegConfig& config, std::size_t width)
        : prf_(prf), receiver_(prf, config, width), ecc_(Bits(payload.begin(), payload.end())) {}

    Draw draw(std::size_t index) {
        pending_.reset();
        auto next = ecc_.next();
        if (next && receiver_.scored(index)) {
            Unit u = prf_(index, prf_symbol(*next));
            pending_ = std::make_pair(*next, u);
            return {u, Phase::Payload, true};
        }
        return {prf_(index, PrfSymbol::None), Phase::Payload, true};
    }

    void observe(std::size_t index, Bit bit) {
        if (auto fired = receiver_.observe(index, bit, pending_)) ecc_.push(*fired);
    }

    const PayloadReceiver& receiver() const { return receiver_; }

private:
    const BoundPrf& prf_;
    PayloadReceiver receiver_;
    EccState ecc_;
    std::optional<std::pair<CodeSymbol, Unit>> pending_;
};

class OneQuerySampling final : public SamplingPolicy {
public:
    OneQuerySampling(const Prf& prf, BitSpan payload, const StegConfig& config, std::size_t width)
        : bound_(prf.bind({})), transmitter_(*bound_, payload, config, width) {}

    Draw draw(const BitSlot& slot) override { return transmitter_.draw(slot.index); }
    void observe(const BitSlot& slot, Bit bit, double) override { transmitter_.observe(slot.index, bit); }

    const PayloadReceiver& receiver() const { return transmitter_.receiver(); }

private:
    std::unique_ptr<BoundPrf> bound_;
    PayloadTransmitter transmitter_;
};

class FullSampling final : public SamplingPolicy {
public:
    FullSampling(const Prf& prf, BitSpan payload, const StegConfig& config, std::size_t width, RandomSource& rng)
        : prf_(prf), payload_(payload.begin(), payload.end()), config_(config), width_(width), rng_(rng) {}

    Draw draw(const BitSlot& slot) override {
        switch (phase_) {
        case Phase::Entropy: return {rng_.next_unit(), Phase::Entropy, false};
        case Phase::Mark: return {(*bound_)(slot.index, PrfSymbol::None), Phase::Mark, true};
        default: return transmitter_->draw(slot.index);
        }
    }

    void observe(const BitSlot& slot, Bit bit, double entropy) override {
        bits_.push_back(bit);
        switch (phase_) {
        case Phase::Entropy:
            entropy_ += entropy;
            if (entropy_ >= static_cast<double>(config_.lambda_bits)) {
                prefix_length_ = bits_.size();
                bound_ = prf_.bind(bits_);
                phase_ = Phase::Mark;
            }
            break;
        case Phase::Mark:
            if (slot.index % width_ < config_.scored_bits_per_token.value_or(width_)) {
                mark_.add(bit_score(bit, (*bound_)(slot.index, PrfSymbol::None)));
            }
            if (mark_.exceeds(static_cast<double>(config_.lambda_bits))) {
                payload_start_ = slot.index + 1;
                transmitter_.emplace(*bound_, payload_, config_, width_);
                phase_ = Phase::Payload;
            }
            break;
        default: transmitter_->observe(slot.index, bit); break;
        }
    }

    std::optional<std::size_t> prefix_length() const { return prefix_length_; }
    std::optional<std::size_t> payload_start() const { return payload_start_; }
    const PayloadTransmitter* transmitter() const { return transmitter_ ? &*transmitter_ : nullptr; }

private:
    const Prf& prf_;
    Bits payload_;
    StegConfig config_;
    std::size_t width_;
    RandomSource& rng_;

    Phase phase_ = Phase::Entropy;
    Bits bits_;
    double entropy_ = 0.0;
    std::unique_ptr<BoundPrf> bound_;
    Score mark_;
    std::optional<PayloadTransmitter> transmitter_;
    std::optional<std::size_t> prefix_length_;
    std::optional<std::size_t> payload_start_;
};

void check_payload(BitSpan payload) {
    if (payload.empty()) throw ConfigError("payload must not be empty");
}

void copy_code(Transcript& t, const PayloadReceiver& receiver) {
    t.code = receiver.code();
    t.code_positions = receiver.positions();
}

/// Payload-phase replay shared by both retrievers.
Retrieval replay_payload(const BoundPrf& prf, BitSpan bits, std::size_t start, const StegConfig& config,
                         std::size_t width) {
    PayloadReceiver receiver(prf, config, width);
    for (std::size_t i = start; i < bits.size(); ++i) {
        if (config.max_payload_bits && receiver.decoded().size() >= *config.max_payload_bits) break;
        receiver.observe(i, bits[i]);
    }
    Retrieval r;
    r.payload = receiver.decoded();
    if (config.max_payload_bits && r.payload.size() > *config.max_payload_bits) {
        r.payload.resize(*config.max_payload_bits);
    }
    r.code = receiver.code();
    r.code_positions = receiver.positions();
    r.payload_start = start;
    return r;
}

} // namespace

Transcript steg_generate_one(const Prf& prf, Model& model, std::string_view prompt, BitSpan payload,
                             const StegConfig& config) {
    check_payload(payload);
    const std::size_t width = token_width(model.vocab_size());
    config.validate(width);
    OneQuerySampling policy(prf, payload, config, width);
    Transcript t = generate(model, prompt, policy);
    t.mark_end = 0;
    copy_code(t, policy.receiver());
    return t;
}

Retrieval steg_retrieve_one(const Prf& prf, BitSpan bits, const StegConfig& config, std::size_t token_width) {
    config.validate(token_width);
    auto bound = prf.bind({});
    return replay_payload(*bound, bits, 0, config, token_width);
}

Transcript steg_generate(const Prf& prf, Model& model, std::string_view prompt, BitSpan payload,
                         const StegConfig& config, RandomSource& rng) {
    check_payload(payload);
    const std::size_t width = token_width(model.vocab_size());
    config.validate(width);
    FullSampling policy(prf, payload, config, width, rng);
    Transcript t = generate(model, prompt, policy);
    t.phase_boundary = policy.prefix_length();
    t.mark_end = policy.payload_start();
    t.low_entropy = !policy.payload_start().has_value();
    if (const auto* tx = policy.transmitter()) copy_code(t, tx->receiver());
    return t;
}

std::optional<Retrieval> steg_retrieve(const Prf& prf, BitSpan bits, const StegConfig& config,
                                       std::size_t token_width) {
    config.validate(token_width);
    const std::size_t n = bits.size();
    const double lambda = static_cast<double>(config.lambda_bits);
    const std::size_t cap = kMarkVerifyBitsPerLambda * static_cast<std::size_t>(config.lambda_bits);
    const std::size_t scored_bits = config.scored_bits_per_token.value_or(token_width);

    for (std::size_t j = 1; j < n; ++j) {
        auto bound = prf.bind(bits.first(j));
        Score mark;
        std::size_t i = j;
        while (i < n && i - j < cap && !mark.exceeds(lambda)) {
            if (i % token_width < scored_bits) mark.add(bit_score(bits[i], (*bound)(i, PrfSymbol::None)));
            ++i;
        }
        if (!mark.exceeds(lambda)) continue;
        Retrieval r = replay_payload(*bound, bits, i, config, token_width);
        if (!r.payload.empty()) {
            r.prefix_length = j;
            return r;
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------

SaturationResult saturation_check(std::span<const double> entropies, std::size_t r0) {
    if (r0 < 2) throw ConfigError("saturation window r0 must be at least 2");
    const std::size_t n = entropies.size();
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t k = 0; k < n; ++k) prefix[k + 1] = prefix[k] + entropies[k];
    for (std::size_t r = r0; r <= n; ++r) {
        const double need = 10.0 * std::sqrt(static_cast<double>(r)) * std::log(static_cast<double>(r));
        for (std::size_t start = 0; start + r <= n; ++start) {
            if (prefix[start + r] - prefix[start] < need) return {false, std::make_pair(start + 1, r)};
        }
    }
    return {};
}

Bits frame_bits(BitSpan payload) {
    if (payload.size() > 0xFFFF) throw EncodingError("payload longer than 65535 bits");
    Bits out;
    out.reserve(kFrameHeaderBits + payload.size());
    for (int shift = 15; shift >= 0; --shift) out.push_back(static_cast<Bit>((payload.size() >> shift) & 1U));
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

Bits frame_payload(std::span<const std::uint8_t> bytes) { return frame_bits(bytes_to_bits(bytes)); }

Unframed unframe(BitSpan bits) {
    Unframed u;
    if (bits.size() < kFrameHeaderBits) return u;
    for (std::size_t k = 0; k < kFrameHeaderBits; ++k) u.declared_bits = (u.declared_bits << 1) | bits[k];
    if (u.declared_bits == 0) return u; // embedding never frames an empty payload
    const std::size_t available = std::min(bits.size() - kFrameHeaderBits, u.declared_bits);
    u.payload_bits.assign(bits.begin() + kFrameHeaderBits, bits.begin() + kFrameHeaderBits + available);
    u.status = available == u.declared_bits ? Unframed::Status::Full : Unframed::Status::Partial;
    return u;
}

} // namespace steg
