#include "steg/transcript.hpp"

#include "steg/error.hpp"

namespace steg {

std::string to_string(Phase p) {
    switch (p) {
    case Phase::Plain: return "plain";
    case Phase::Entropy: return "entropy";
    case Phase::Mark: return "mark";
    case Phase::Payload: return "payload";
    }
    return "?";
}

Phase phase_from_string(std::string_view s) {
    if (s == "plain") return Phase::Plain;
    if (s == "entropy") return Phase::Entropy;
    if (s == "mark") return Phase::Mark;
    if (s == "payload") return Phase::Payload;
    throw EncodingError("unknown phase '" + std::string(s) + "'");
}

std::vector<double> Transcript::entropies() const {
    std::vector<double> out;
    out.reserve(per_bit.size());
    for (const auto& r : per_bit) out.push_back(r.entropy);
    return out;
}

double Transcript::total_entropy() const {
    double h = 0.0;
    for (const auto& r : per_bit) h += r.entropy;
    return h;
}

namespace {

nlohmann::json optional_index(const std::optional<std::size_t>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<std::size_t> read_optional_index(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::size_t>();
}

} // namespace

nlohmann::json to_json(const Transcript& t, bool debug) {
    nlohmann::json per_bit = nlohmann::json::array();
    for (const auto& r : t.per_bit) {
        nlohmann::json e{{"p_one", r.p_one}, {"entropy", r.entropy}, {"phase", to_string(r.phase)}};
        if (debug && r.keyed) e["prf_value"] = r.draw.value();
        per_bit.push_back(std::move(e));
    }
    return nlohmann::json{
        {"tokens", t.tokens},
        {"token_width", t.token_width},
        {"bits", bits_to_string(t.bits)},
        {"phase_boundary", optional_index(t.phase_boundary)},
        {"mark_end", optional_index(t.mark_end)},
        {"code", symbols_to_string(t.code)},
        {"code_positions", t.code_positions},
        {"low_entropy", t.low_entropy},
        {"ended_by_done", t.ended_by_done},
        {"model_config_digest", t.model_config_digest},
        {"per_bit", std::move(per_bit)},
    };
}

Transcript transcript_from_json(const nlohmann::json& j) {
    try {
        Transcript t;
        t.tokens = j.at("tokens").get<std::vector<TokenId>>();
        t.token_width = j.value("token_width", std::size_t{1});
        t.bits = bits_from_string(j.at("bits").get<std::string>());
        t.phase_boundary = read_optional_index(j, "phase_boundary");
        t.mark_end = read_optional_index(j, "mark_end");
        t.code = symbols_from_string(j.value("code", std::string()));
        t.code_positions = j.value("code_positions", std::vector<std::size_t>{});
        t.low_entropy = j.value("low_entropy", false);
        t.ended_by_done = j.value("ended_by_done", false);
        t.model_config_digest = j.value("model_config_digest", std::string());
        if (j.contains("per_bit")) {
            for (const auto& e : j.at("per_bit")) {
                BitRecord r;
                r.p_one = e.at("p_one").get<double>();
                r.entropy = e.at("entropy").get<double>();
                r.phase = phase_from_string(e.value("phase", std::string("plain")));
                if (e.contains("prf_value")) {
                    r.keyed = true;
                    r.draw = Unit::from_real(e.at("prf_value").get<double>());
                }
                t.per_bit.push_back(r);
            }
        }
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw EncodingError(std::string("malformed transcript: ") + e.what());
    }
}

Transcript generate(Model& model, std::string_view prompt, SamplingPolicy& policy, std::size_t hard_cap) {
    const std::size_t width = token_width(model.vocab_size());
    const auto done = model.done_token();
    std::size_t cap = model.max_len().value_or(hard_cap);
    if (cap == 0 && !done) throw ConfigError("model has neither a done token nor a length cap");
    if (hard_cap != 0) cap = std::min(cap == 0 ? hard_cap : cap, hard_cap);

    model.begin_session();
    Transcript t;
    t.token_width = width;
    t.model_config_digest = model.config_digest();

    Bits token_bits;
    while (cap == 0 || t.tokens.size() < cap) {
        TokenDistribution dist = model.next_token_dist(prompt, t.tokens);
        dist.validate(model.vocab_size());
        token_bits.clear();
        for (std::size_t k = 0; k < width; ++k) {
            BitSlot slot{t.bits.size(), k, bit_conditional(dist, token_bits).p_one};
            Draw d = policy.draw(slot);
            SampledBit s = sample_bit(BitDistribution{slot.p_one}, d.value);
            token_bits.push_back(s.bit);
            t.bits.push_back(s.bit);
            t.per_bit.push_back({slot.p_one, s.entropy, d.value, d.phase, d.keyed});
            policy.observe(slot, s.bit, s.entropy);
        }
        TokenId token = bits_to_tokens(token_bits, width).front();
        t.tokens.push_back(token);
        if (done && token == *done) {
            t.ended_by_done = true;
            break;
        }
    }
    return t;
}

Transcript sample_plain(Model& model, std::string_view prompt, RandomSource& rng) {
    PlainSampling policy(rng);
    return generate(model, prompt, policy);
}

} // namespace steg
