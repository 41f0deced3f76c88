#pragma once

// Dynamic error-correcting code with noiseless feedback over the ternary
// alphabet {0, 1, <-}. The sender always sends the next message bit when
// the receiver's decoding agrees with the message, and a backspace when it
// carries a wrong suffix. Each correctly received symbol raises the
// potential last - suff by one, each corrupted one lowers it by at most one.

#include "steg/bits.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace steg {

enum class CodeSymbol : std::uint8_t { Zero = 0, One = 1, Back = 2 };

inline constexpr CodeSymbol kCodeSymbols[] = {CodeSymbol::Zero, CodeSymbol::One, CodeSymbol::Back};

/// '0', '1' or '<'.
char to_char(CodeSymbol s);
/// Diagnostics rendering, with the arrow for backspace.
std::string to_display(CodeSymbol s);
std::string symbols_to_string(std::span<const CodeSymbol> symbols);
/// Accepts '0', '1', '<'. Throws EncodingError otherwise.
std::vector<CodeSymbol> symbols_from_string(std::string_view text);

inline CodeSymbol symbol_for_bit(Bit b) { return b ? CodeSymbol::One : CodeSymbol::Zero; }

/// Bits append, backspace drops the last decoded bit (no-op when empty).
Bits decode(std::span<const CodeSymbol> received);

/// Longest i with message[:i] == decode(received)[:i].
std::size_t last_agree(BitSpan message, std::span<const CodeSymbol> received);

/// len(decode(received)) - last_agree.
std::size_t wrong_suffix(BitSpan message, std::span<const CodeSymbol> received);

/// last_agree - wrong_suffix.
long potential(BitSpan message, std::span<const CodeSymbol> received);

/// Backspace while a wrong suffix exists, else the first unconfirmed bit;
/// nullopt once decode(received) equals the whole message.
std::optional<CodeSymbol> next_symbol(BitSpan message, std::span<const CodeSymbol> received);

/// ceil(k / (1 - 2 epsilon)); epsilon in [0, 1/2). Throws ConfigError.
std::size_t required_length(std::size_t k, double epsilon);

/// Sender-side view of a transmission, updated in O(1) per received symbol.
class EccState {
public:
    EccState() = default;
    explicit EccState(Bits message) : message_(std::move(message)) {}

    void push(CodeSymbol received);

    std::optional<CodeSymbol> next() const;
    bool complete() const { return suff() == 0 && last_ == message_.size(); }

    std::size_t last() const { return last_; }
    std::size_t suff() const { return decoded_.size() - last_; }
    long potential() const { return static_cast<long>(last_) - static_cast<long>(suff()); }

    const Bits& message() const { return message_; }
    const Bits& decoded() const { return decoded_; }
    const std::vector<CodeSymbol>& received() const { return received_; }

private:
    Bits message_;
    Bits decoded_;
    std::vector<CodeSymbol> received_;
    std::size_t last_ = 0;
};

struct EccTraceStep {
    std::size_t step = 0;
    std::optional<CodeSymbol> sent; // empty once the transmission is complete
    CodeSymbol received = CodeSymbol::Zero;
    long potential = 0;
    Bits decoded;
};

/// Runs `steps` rounds of the feedback protocol. `channel(step, sent)`
/// returns the symbol the receiver sees; `sent` is empty after completion.
std::vector<EccTraceStep> simulate_transmission(
    BitSpan message, std::size_t steps,
    const std::function<CodeSymbol(std::size_t, std::optional<CodeSymbol>)>& channel);

/// One tab-separated line per step: step, sent, received, potential, decoded.
std::string format_trace(std::span<const EccTraceStep> trace);

} // namespace steg
