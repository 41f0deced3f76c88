#include "support.hpp"

#include "steg/error.hpp"
#include "steg/keyed_randomness.hpp"
#include "steg/watermark.hpp"

#include <doctest.h>

#include <fstream>
#include <set>

using namespace steg;

namespace {

std::vector<std::uint8_t> bytes_of(std::string_view s) { return {s.begin(), s.end()}; }

std::string hex(std::span<const std::uint8_t> b) { return to_hex(b); }

} // namespace

TEST_CASE("hmac_sha256 matches RFC 4231 vectors") {
    std::vector<std::uint8_t> k1(20, 0x0b);
    CHECK(hex(hmac_sha256(k1, bytes_of("Hi There"))) ==
          "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7");
    CHECK(hex(hmac_sha256(bytes_of("Jefe"), bytes_of("what do ya want for nothing?"))) ==
          "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843");
    std::vector<std::uint8_t> k6(131, 0xaa);
    CHECK(hex(hmac_sha256(k6, bytes_of("Test Using Larger Than Block-Size Key - Hash Key First"))) ==
          "60e431591ee0b67f0d8a26aacbf5b77f8e0bc6213728c5140546040f0ee37f54");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("serialization layout") {
    CHECK(hex(serialize({{1, 0, 1}, 7, PrfSymbol::Back})) == "0100000003a0000000000000000702");
    CHECK(hex(serialize({{}, 0, PrfSymbol::None})) == "0100000000000000000000000003");
    Bits r(16, 0);
    r.push_back(1);
    CHECK(hex(serialize({r, 123456789, PrfSymbol::One})) == "010000001100008000000000075bcd1501");
}

TEST_CASE("prf_unit values computed with an independent HMAC implementation") {
    std::vector<std::uint8_t> kb(16);
    for (std::size_t i = 0; i < kb.size(); ++i) kb[i] = static_cast<std::uint8_t>(i);
    SecretKey key(kb);
    CHECK(prf_unit(key, {{1, 0, 1}, 7, PrfSymbol::Back}).raw() == 10367787954601936659ULL);
    CHECK(prf_unit(key, {{}, 0, PrfSymbol::None}).raw() == 331517735588095138ULL);
    Bits r(16, 0);
    r.push_back(1);
    CHECK(prf_unit(key, {r, 123456789, PrfSymbol::One}).raw() == 1469618838992897373ULL);
}

TEST_CASE("bound evaluation agrees with direct evaluation") {
    SeededRandom rng(5);
    SecretKey key = setup(256, rng);
    HmacPrf prf(key);
    std::mt19937_64 gen(11);
    for (int trial = 0; trial < 50; ++trial) {
        Bits r = test::random_bits(gen, gen() % 40);
        auto bound = prf.bind(r);
        for (int k = 0; k < 20; ++k) {
            std::uint64_t i = gen();
            auto sym = static_cast<PrfSymbol>(gen() % 4);
            REQUIRE(prf.eval({r, i, sym}) == (*bound)(i, sym));
            REQUIRE(prf.eval({r, i, sym}) == prf_unit(key, {r, i, sym}));
        }
    }
}

TEST_CASE("distinct inputs serialize differently") {
    std::mt19937_64 gen(3);
    std::set<std::vector<std::uint8_t>> seen;
    std::set<std::tuple<Bits, std::uint64_t, int>> logical;
    for (int k = 0; k < 20000; ++k) {
        // Small ranges so that near-collisions (trailing zeros, short prefixes) are common.
        Bits r = test::random_bits(gen, gen() % 12);
        if (gen() % 3 == 0) r.assign(gen() % 12, 0);
        std::uint64_t i = gen() % 4;
        int s = static_cast<int>(gen() % 4);
        auto bytes = serialize({r, i, static_cast<PrfSymbol>(s)});
        bool new_logical = logical.insert({r, i, s}).second;
        bool new_bytes = seen.insert(bytes).second;
        REQUIRE(new_logical == new_bytes);
    }
    CHECK(serialize({{}, 1, PrfSymbol::Zero}) != serialize({{0}, 1, PrfSymbol::None}));
}

TEST_CASE("prf output is uniform") {
    SeededRandom rng(99);
    HmacPrf prf(setup(128, rng));
    Bits r{1, 1, 0};
    auto bound = prf.bind(r);
    std::vector<double> xs;
    for (std::uint64_t i = 0; i < 100000; ++i) xs.push_back((*bound)(i, PrfSymbol::None).value());
    double m = test::mean(xs);
    CHECK(m >= 0.495);
    CHECK(m <= 0.505);
    CHECK(test::ks_distance(xs, [](double x) { return x; }) < 0.01);
}

TEST_CASE("unit conversion and comparison") {
    CHECK(Unit(0).value() == 0.0);
    CHECK(Unit(std::uint64_t{1} << 63).value() == 0.5);
    CHECK(Unit::from_real(0.25).raw() == std::uint64_t{1} << 62);
    CHECK(Unit::from_real(-1.0).raw() == 0);
    CHECK(Unit::from_real(2.0).raw() == ~std::uint64_t{0});
    // The comparison uses all 64 bits: 2^-64 above 0.5 is not at most 0.5.
    CHECK(unit_at_most(Unit(std::uint64_t{1} << 63), 0.5));
    CHECK_FALSE(unit_at_most(Unit((std::uint64_t{1} << 63) + 1), 0.5));
    CHECK(unit_at_most(Unit(~std::uint64_t{0}), 1.0));
    CHECK(unit_at_most(Unit(0), 0.0));
    CHECK_FALSE(unit_at_most(Unit(1), 0.0));
}

TEST_CASE("setup") {
    SystemRandom sys;
    SecretKey a = setup(128, sys), b = setup(128, sys);
    CHECK(a.bytes().size() == 16);
    CHECK(a != b);
    CHECK(setup(64).bytes().size() == 8);
    CHECK(setup(256).bytes().size() == 32);
    CHECK_THROWS_AS(setup(96), ConfigError);
    CHECK_THROWS_AS(setup(0), ConfigError);

    SeededRandom r1(42), r2(42);
    CHECK(setup(128, r1) == setup(128, r2));
}

TEST_CASE("key files") {
    test::TempDir dir;
    SeededRandom rng(1);
    SecretKey key = setup(128, rng);
    auto path = dir / "k.hex";
    save_key(path, key, false);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line.size() == 32);
    CHECK(load_key(path) == key);
    CHECK_THROWS_AS(save_key(path, key, false), ConfigError);
    SecretKey other = setup(256, rng);
    save_key(path, other, true);
    CHECK(load_key(path) == other);

    std::ofstream(dir / "bad.hex") << "xyz\n";
    CHECK_THROWS(load_key(dir / "bad.hex"));
    std::ofstream(dir / "short.hex") << "abcd\n";
    CHECK_THROWS_AS(load_key(dir / "short.hex"), ConfigError);
    CHECK_THROWS_AS(load_key(dir / "missing.hex"), ConfigError);
}

TEST_CASE("score of a key-independent bit is exponential with mean 1") {
    SeededRandom rng(7);
    HmacPrf prf(setup(128, rng));
    for (Bit bit : {Bit{0}, Bit{1}}) {
        std::vector<double> s;
        for (std::uint64_t i = 0; i < 100000; ++i) s.push_back(bit_score(bit, prf.eval({{}, i, PrfSymbol::None})));
        CHECK(test::mean(s) == doctest::Approx(1.0).epsilon(0.02));
        CHECK(test::ks_distance(s, [](double x) { return 1.0 - std::exp(-x); }) < 0.01);
    }
}
