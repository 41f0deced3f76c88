#include "steg/dynamic_ecc.hpp"

#include "steg/error.hpp"

#include <cmath>
#include <sstream>

namespace steg {

char to_char(CodeSymbol s) {
    switch (s) {
    case CodeSymbol::Zero: return '0';
    case CodeSymbol::One: return '1';
    case CodeSymbol::Back: return '<';
    }
    return '?';
}

std::string to_display(CodeSymbol s) { return s == CodeSymbol::Back ? "←" : std::string(1, to_char(s)); }

std::string symbols_to_string(std::span<const CodeSymbol> symbols) {
    std::string out;
    out.reserve(symbols.size());
    for (auto s : symbols) out.push_back(to_char(s));
    return out;
}

std::vector<CodeSymbol> symbols_from_string(std::string_view text) {
    std::vector<CodeSymbol> out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
        case '0': out.push_back(CodeSymbol::Zero); break;
        case '1': out.push_back(CodeSymbol::One); break;
        case '<': out.push_back(CodeSymbol::Back); break;
        default: throw EncodingError(std::string("invalid code symbol '") + c + "'");
        }
    }
    return out;
}

Bits decode(std::span<const CodeSymbol> received) {
    Bits out;
    for (auto s : received) {
        if (s == CodeSymbol::Back) {
            if (!out.empty()) out.pop_back();
        } else {
            out.push_back(s == CodeSymbol::One ? 1 : 0);
        }
    }
    return out;
}

std::size_t last_agree(BitSpan message, std::span<const CodeSymbol> received) {
    return common_prefix(message, decode(received));
}

std::size_t wrong_suffix(BitSpan message, std::span<const CodeSymbol> received) {
    Bits d = decode(received);
    return d.size() - common_prefix(message, d);
}

long potential(BitSpan message, std::span<const CodeSymbol> received) {
    Bits d = decode(received);
    auto last = static_cast<long>(common_prefix(message, d));
    return last - (static_cast<long>(d.size()) - last);
}

std::optional<CodeSymbol> next_symbol(BitSpan message, std::span<const CodeSymbol> received) {
    Bits d = decode(received);
    std::size_t last = common_prefix(message, d);
    if (d.size() > last) return CodeSymbol::Back;
    if (last == message.size()) return std::nullopt;
    return symbol_for_bit(message[last]);
}

std::size_t required_length(std::size_t k, double epsilon) {
    if (!(epsilon >= 0.0 && epsilon < 0.5)) throw ConfigError("epsilon must lie in [0, 1/2)");
    const double exact = static_cast<double>(k) / (1.0 - 2.0 * epsilon);
    // 1 - 2*0.4 is not exactly 0.2 in binary; snap values within rounding of an integer.
    const double nearest = std::round(exact);
    if (std::abs(exact - nearest) <= 1e-9 * std::max(1.0, exact)) return static_cast<std::size_t>(nearest);
    return static_cast<std::size_t>(std::ceil(exact));
}

void EccState::push(CodeSymbol s) {
    received_.push_back(s);
    if (s == CodeSymbol::Back) {
        if (decoded_.empty()) return;
        decoded_.pop_back();
        if (last_ > decoded_.size()) last_ = decoded_.size();
        return;
    }
    Bit b = s == CodeSymbol::One ? 1 : 0;
    if (suff() == 0 && last_ < message_.size() && message_[last_] == b) ++last_;
    decoded_.push_back(b);
}

std::optional<CodeSymbol> EccState::next() const {
    if (suff() > 0) return CodeSymbol::Back;
    if (last_ == message_.size()) return std::nullopt;
    return symbol_for_bit(message_[last_]);
}

std::vector<EccTraceStep> simulate_transmission(
    BitSpan message, std::size_t steps,
    const std::function<CodeSymbol(std::size_t, std::optional<CodeSymbol>)>& channel) {
    EccState state(Bits(message.begin(), message.end()));
    std::vector<EccTraceStep> trace;
    trace.reserve(steps);
    for (std::size_t step = 0; step < steps; ++step) {
        auto sent = state.next();
        CodeSymbol got = channel(step, sent);
        state.push(got);
        trace.push_back({step, sent, got, state.potential(), state.decoded()});
    }
    return trace;
}

std::string format_trace(std::span<const EccTraceStep> trace) {
    std::ostringstream out;
    for (const auto& s : trace) {
        out << s.step << '\t' << (s.sent ? to_char(*s.sent) : '-') << '\t' << to_char(s.received) << '\t'
            << s.potential << '\t' << bits_to_string(s.decoded) << '\n';
    }
    return out.str();
}

} // namespace steg
