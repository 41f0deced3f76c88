#include "steg/keyed_randomness.hpp"

#include "steg/error.hpp"

#include <openssl/evp.h>
#include <openssl/rand.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace steg {

Unit Unit::from_real(double x) {
    if (!(x > 0.0)) return Unit(0);
    if (x >= 1.0) return Unit(std::numeric_limits<std::uint64_t>::max());
    long double scaled = std::floor(std::ldexp(static_cast<long double>(x), 64));
    if (scaled >= 18446744073709551615.0L) return Unit(std::numeric_limits<std::uint64_t>::max());
    return Unit(static_cast<std::uint64_t>(scaled));
}

double Unit::value() const {
    // Top 53 bits keep the result strictly below 1.
    return std::ldexp(static_cast<double>(raw_ >> 11), -53);
}

bool unit_at_most(Unit u, double p) {
    if (p >= 1.0) return true;
    if (p < 0.0 || std::isnan(p)) return false;
    long double threshold = std::floor(std::ldexp(static_cast<long double>(p), 64));
    return static_cast<long double>(u.raw()) <= threshold;
}

std::uint64_t RandomSource::next_u64() {
    std::array<std::uint8_t, 8> buf{};
    fill(buf);
    std::uint64_t v = 0;
    for (std::uint8_t b : buf) v = (v << 8) | b;
    return v;
}

void SystemRandom::fill(std::span<std::uint8_t> out) {
    if (out.empty()) return;
    if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) {
        throw Error("system randomness source failed");
    }
}

void SeededRandom::fill(std::span<std::uint8_t> out) {
    std::size_t i = 0;
    while (i < out.size()) {
        std::uint64_t word = engine_();
        for (int k = 0; k < 8 && i < out.size(); ++k, ++i) {
            out[i] = static_cast<std::uint8_t>(word >> (56 - 8 * k));
        }
    }
}

// ---------------------------------------------------------------------------
// Keys

namespace {

bool supported_key_bytes(std::size_t n) { return n == 8 || n == 16 || n == 32; }

} // namespace

SecretKey::SecretKey(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {
    if (!supported_key_bytes(bytes_.size())) {
        throw ConfigError("secret key must be 64, 128 or 256 bits, got " +
                          std::to_string(bytes_.size() * 8));
    }
}

std::string SecretKey::to_hex() const { return steg::to_hex(bytes_); }

SecretKey SecretKey::from_hex(std::string_view hex) {
    try {
        return SecretKey(steg::from_hex(hex));
    } catch (const EncodingError& e) {
        throw ConfigError(std::string("malformed key: ") + e.what());
    }
}

SecretKey setup(int lambda_bits, RandomSource& rng) {
    if (lambda_bits != 64 && lambda_bits != 128 && lambda_bits != 256) {
        throw ConfigError("unsupported key size " + std::to_string(lambda_bits) +
                          " (expected 64, 128 or 256)");
    }
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(lambda_bits / 8));
    rng.fill(bytes);
    return SecretKey(std::move(bytes));
}

SecretKey setup(int lambda_bits) {
    SystemRandom rng;
    return setup(lambda_bits, rng);
}

void save_key(const std::filesystem::path& path, const SecretKey& key, bool force) {
    if (!force && std::filesystem::exists(path)) {
        throw ConfigError("refusing to overwrite existing key file " + path.string());
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write key file " + path.string());
    out << key.to_hex() << '\n';
}

SecretKey load_key(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read key file " + path.string());
    std::string line;
    std::getline(in, line);
    return SecretKey::from_hex(line);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_u64(std::uint8_t* out, std::uint64_t v) {
    for (int k = 0; k < 8; ++k) out[k] = static_cast<std::uint8_t>(v >> (56 - 8 * k));
}

std::vector<std::uint8_t> serialize_header(BitSpan prefix) {
    if (prefix.size() > std::numeric_limits<std::uint32_t>::max()) {
        throw EncodingError("PRF prefix too long");
    }
    std::vector<std::uint8_t> out;
    out.reserve(5 + (prefix.size() + 7) / 8 + 9);
    out.push_back(0x01);
    put_u32(out, static_cast<std::uint32_t>(prefix.size()));
    auto packed = pack_bits(prefix);
    out.insert(out.end(), packed.begin(), packed.end());
    return out;
}

std::array<std::uint8_t, 9> serialize_tail(std::uint64_t index, PrfSymbol symbol) {
    std::array<std::uint8_t, 9> tail{};
    put_u64(tail.data(), index);
    tail[8] = static_cast<std::uint8_t>(symbol);
    return tail;
}

Unit unit_from_tag(const std::uint8_t* tag) {
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v = (v << 8) | tag[k];
    return Unit(v);
}

} // namespace

std::vector<std::uint8_t> serialize(const PrfInput& input) {
    auto out = serialize_header(input.prefix);
    auto tail = serialize_tail(input.index, input.symbol);
    out.insert(out.end(), tail.begin(), tail.end());
    return out;
}

namespace {

class ForwardingBoundPrf final : public BoundPrf {
public:
    ForwardingBoundPrf(const Prf& prf, BitSpan prefix) : prf_(prf), prefix_(prefix.begin(), prefix.end()) {}

    Unit operator()(std::uint64_t index, PrfSymbol symbol) const override {
        return prf_.eval(PrfInput{prefix_, index, symbol});
    }

private:
    const Prf& prf_;
    Bits prefix_;
};

} // namespace

std::unique_ptr<BoundPrf> Prf::bind(BitSpan prefix) const {
    return std::make_unique<ForwardingBoundPrf>(*this, prefix);
}

// ---------------------------------------------------------------------------
// HMAC-SHA256 with the padded key blocks absorbed once.

namespace {

struct MdCtxDeleter {
    void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};
using MdCtx = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;

constexpr std::size_t kBlock = 64;
constexpr std::size_t kDigest = 32;

MdCtx new_ctx() {
    MdCtx ctx(EVP_MD_CTX_new());
    if (!ctx) throw Error("EVP_MD_CTX_new failed");
    return ctx;
}

void check(int rc, const char* what) {
    if (rc != 1) throw Error(std::string("OpenSSL failure in ") + what);
}

MdCtx copy_ctx(const EVP_MD_CTX* from) {
    MdCtx ctx = new_ctx();
    check(EVP_MD_CTX_copy_ex(ctx.get(), from), "EVP_MD_CTX_copy_ex");
    return ctx;
}

std::array<std::uint8_t, kDigest> sha256(std::span<const std::uint8_t> data) {
    std::array<std::uint8_t, kDigest> out{};
    unsigned int len = 0;
    check(EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr), "EVP_Digest");
    return out;
}

struct HmacKeyState {
    MdCtx inner;
    MdCtx outer;

    explicit HmacKeyState(std::span<const std::uint8_t> key) : inner(new_ctx()), outer(new_ctx()) {
        std::array<std::uint8_t, kBlock> block{};
        if (key.size() > kBlock) {
            auto digest = sha256(key);
            std::memcpy(block.data(), digest.data(), digest.size());
        } else if (!key.empty()) {
            std::memcpy(block.data(), key.data(), key.size());
        }
        std::array<std::uint8_t, kBlock> ipad{};
        std::array<std::uint8_t, kBlock> opad{};
        for (std::size_t i = 0; i < kBlock; ++i) {
            ipad[i] = block[i] ^ 0x36;
            opad[i] = block[i] ^ 0x5c;
        }
        check(EVP_DigestInit_ex(inner.get(), EVP_sha256(), nullptr), "EVP_DigestInit_ex");
        check(EVP_DigestUpdate(inner.get(), ipad.data(), ipad.size()), "EVP_DigestUpdate");
        check(EVP_DigestInit_ex(outer.get(), EVP_sha256(), nullptr), "EVP_DigestInit_ex");
        check(EVP_DigestUpdate(outer.get(), opad.data(), opad.size()), "EVP_DigestUpdate");
    }

    // `partial_inner` has already absorbed ipad and any message prefix.
    std::array<std::uint8_t, kDigest> finish(const EVP_MD_CTX* partial_inner,
                                            std::span<const std::uint8_t> rest) const {
        MdCtx in = copy_ctx(partial_inner);
        if (!rest.empty()) check(EVP_DigestUpdate(in.get(), rest.data(), rest.size()), "EVP_DigestUpdate");
        std::array<std::uint8_t, kDigest> inner_tag{};
        unsigned int len = 0;
        check(EVP_DigestFinal_ex(in.get(), inner_tag.data(), &len), "EVP_DigestFinal_ex");
        MdCtx out = copy_ctx(outer.get());
        check(EVP_DigestUpdate(out.get(), inner_tag.data(), inner_tag.size()), "EVP_DigestUpdate");
        std::array<std::uint8_t, kDigest> tag{};
        check(EVP_DigestFinal_ex(out.get(), tag.data(), &len), "EVP_DigestFinal_ex");
        return tag;
    }
};

} // namespace

std::array<std::uint8_t, 32> hmac_sha256(std::span<const std::uint8_t> key,
                                         std::span<const std::uint8_t> message) {
    HmacKeyState state(key);
    return state.finish(state.inner.get(), message);
}

std::string sha256_hex(std::string_view data) {
    auto digest = sha256({reinterpret_cast<const std::uint8_t*>(data.data()), data.size()});
    return to_hex(digest);
}

struct HmacPrf::State {
    HmacKeyState key;
    explicit State(std::span<const std::uint8_t> k) : key(k) {}
};

namespace {

class HmacBoundPrf final : public BoundPrf {
public:
    HmacBoundPrf(const HmacKeyState& key, BitSpan prefix) : key_(key), absorbed_(copy_ctx(key.inner.get())) {
        auto header = serialize_header(prefix);
        check(EVP_DigestUpdate(absorbed_.get(), header.data(), header.size()), "EVP_DigestUpdate");
    }

    Unit operator()(std::uint64_t index, PrfSymbol symbol) const override {
        auto tail = serialize_tail(index, symbol);
        auto tag = key_.finish(absorbed_.get(), tail);
        return unit_from_tag(tag.data());
    }

private:
    const HmacKeyState& key_;
    MdCtx absorbed_;
};

} // namespace

HmacPrf::HmacPrf(const SecretKey& key) : state_(std::make_unique<State>(key.bytes())) {}

HmacPrf::~HmacPrf() = default;

Unit HmacPrf::eval(const PrfInput& input) const {
    auto message = serialize(input);
    auto tag = state_->key.finish(state_->key.inner.get(), message);
    return unit_from_tag(tag.data());
}

std::unique_ptr<BoundPrf> HmacPrf::bind(BitSpan prefix) const {
    return std::make_unique<HmacBoundPrf>(state_->key, prefix);
}

Unit prf_unit(const SecretKey& key, const PrfInput& input) { return HmacPrf(key).eval(input); }

} // namespace steg
