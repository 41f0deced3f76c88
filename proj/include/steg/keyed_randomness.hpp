#pragma once

// Keyed pseudorandom function over structured inputs, secret keys and
// the randomness sources used for key generation and untied sampling.

#include "steg/bits.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace steg {

/// A value in [0,1) held as a 64-bit numerator over 2^64.
class Unit {
public:
    constexpr Unit() = default;
    constexpr explicit Unit(std::uint64_t raw) : raw_(raw) {}

    /// Nearest representable value at or below `x`; x is clamped to [0,1).
    static Unit from_real(double x);

    constexpr std::uint64_t raw() const { return raw_; }
    double value() const;

    friend constexpr bool operator==(Unit, Unit) = default;

private:
    std::uint64_t raw_ = 0;
};

/// Exact test of `u <= p` on the full 64-bit numerator.
bool unit_at_most(Unit u, double p);

/// Source of uniformly random bytes.
class RandomSource {
public:
    virtual ~RandomSource() = default;
    virtual void fill(std::span<std::uint8_t> out) = 0;

    std::uint64_t next_u64();
    Unit next_unit() { return Unit(next_u64()); }
};

/// Operating-system CSPRNG (OpenSSL RAND_bytes).
class SystemRandom final : public RandomSource {
public:
    void fill(std::span<std::uint8_t> out) override;
};

/// Deterministic stream for tests and reproducible runs. Not for keys in production.
class SeededRandom final : public RandomSource {
public:
    explicit SeededRandom(std::uint64_t seed) : engine_(seed) {}
    void fill(std::span<std::uint8_t> out) override;
    std::uint64_t raw() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

class SecretKey {
public:
    /// Throws ConfigError unless the length is 8, 16 or 32 bytes.
    explicit SecretKey(std::vector<std::uint8_t> bytes);

    std::span<const std::uint8_t> bytes() const { return bytes_; }
    int lambda_bits() const { return static_cast<int>(bytes_.size() * 8); }
    std::string to_hex() const;
    static SecretKey from_hex(std::string_view hex);

    friend bool operator==(const SecretKey&, const SecretKey&) = default;

private:
    std::vector<std::uint8_t> bytes_;
};

/// Fresh key of lambda_bits/8 bytes. lambda_bits must be 64, 128 or 256.
SecretKey setup(int lambda_bits, RandomSource& rng);
SecretKey setup(int lambda_bits);

/// One hex line. Refuses to overwrite unless `force`; throws ConfigError.
void save_key(const std::filesystem::path& path, const SecretKey& key, bool force);
SecretKey load_key(const std::filesystem::path& path);

/// Code symbol slot of a PRF input; None marks payload-independent draws.
enum class PrfSymbol : std::uint8_t { Zero = 0x00, One = 0x01, Back = 0x02, None = 0x03 };

struct PrfInput {
    Bits prefix;
    std::uint64_t index = 0;
    PrfSymbol symbol = PrfSymbol::None;
};

/// version 0x01 | u32be bit length of prefix | prefix packed MSB-first |
/// u64be index | symbol byte
std::vector<std::uint8_t> serialize(const PrfInput& input);

/// A PRF with the prefix already fixed, evaluated on (index, symbol).
class BoundPrf {
public:
    virtual ~BoundPrf() = default;
    virtual Unit operator()(std::uint64_t index, PrfSymbol symbol) const = 0;
};

class Prf {
public:
    virtual ~Prf() = default;
    virtual Unit eval(const PrfInput& input) const = 0;

    /// Default binding forwards to eval(); implementations may precompute.
    virtual std::unique_ptr<BoundPrf> bind(BitSpan prefix) const;
};

/// HMAC-SHA256 over the canonical serialization; the first 8 bytes of the
/// tag, big-endian, are the numerator of the unit value.
class HmacPrf final : public Prf {
public:
    explicit HmacPrf(const SecretKey& key);
    ~HmacPrf() override;
    HmacPrf(const HmacPrf&) = delete;
    HmacPrf& operator=(const HmacPrf&) = delete;

    Unit eval(const PrfInput& input) const override;
    std::unique_ptr<BoundPrf> bind(BitSpan prefix) const override;

    struct State;

private:
    std::unique_ptr<State> state_;
};

Unit prf_unit(const SecretKey& key, const PrfInput& input);

/// Plain HMAC-SHA256, exposed for conformance tests.
std::array<std::uint8_t, 32> hmac_sha256(std::span<const std::uint8_t> key,
                                         std::span<const std::uint8_t> message);

/// SHA-256 of a string, lower-case hex.
std::string sha256_hex(std::string_view data);

} // namespace steg
