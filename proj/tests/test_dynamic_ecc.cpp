#include "support.hpp"

#include "steg/dynamic_ecc.hpp"
#include "steg/error.hpp"

#include <doctest.h>

using namespace steg;
using test::all_bit_strings;
using test::all_codes;

namespace {

std::vector<CodeSymbol> sy(std::string_view s) { return symbols_from_string(s); }

} // namespace

TEST_CASE("decode") {
    CHECK(decode(sy("10<1")) == Bits{1, 1});
    CHECK(decode(sy("<<0")) == Bits{0});
    CHECK(decode(sy("")).empty());
    CHECK(decode(sy("1<<<")).empty());
}

TEST_CASE("decode agrees with the recursive definition on every code of length <= 8") {
    for (std::size_t n = 0; n <= 8; ++n) {
        for (const auto& y : all_codes(n)) REQUIRE(decode(y) == test::decode_recursive(y));
    }
}

TEST_CASE("last_agree and wrong_suffix") {
    Bits m{1, 0, 1};
    CHECK(last_agree(m, sy("10")) == 2);
    CHECK(last_agree(m, sy("11")) == 1);
    CHECK(wrong_suffix(m, sy("11")) == 1);
    CHECK(last_agree(m, sy("101")) == 3);
    CHECK(last_agree(m, sy("1011")) == 3);
    CHECK(wrong_suffix(m, sy("1011")) == 1);
    CHECK(potential(m, sy("0")) == -1);

    std::mt19937_64 gen(21);
    for (int trial = 0; trial < 5000; ++trial) {
        Bits msg = test::random_bits(gen, gen() % 10);
        std::vector<CodeSymbol> y(gen() % 14);
        for (auto& s : y) s = static_cast<CodeSymbol>(gen() % 3);
        Bits d = test::decode_recursive(y);
        std::size_t expect = test::prefix_scan(msg, d);
        REQUIRE(last_agree(msg, y) == expect);
        REQUIRE(last_agree(msg, y) + wrong_suffix(msg, y) == d.size());
    }
}

TEST_CASE("next_symbol") {
    Bits m{1, 0, 1};
    CHECK(next_symbol(m, sy("")) == CodeSymbol::One);
    CHECK(next_symbol(m, sy("11")) == CodeSymbol::Back);
    CHECK(next_symbol(m, sy("11<")) == CodeSymbol::Zero);
    CHECK_FALSE(next_symbol(m, sy("101")).has_value());
    CHECK(next_symbol(m, sy("1011")) == CodeSymbol::Back);
    CHECK_FALSE(next_symbol(Bits{}, sy("")).has_value());
}

TEST_CASE("required_length") {
    CHECK(required_length(10, 0.25) == 20);
    CHECK(required_length(7, 0.0) == 7);
    CHECK(required_length(64, 0.4) == 320);
    CHECK(required_length(64, 0.25) == 128);
    CHECK(required_length(10, 0.3) == 25);
    CHECK(required_length(11, 0.3) == 28);
    CHECK_THROWS_AS(required_length(10, 0.5), ConfigError);
    CHECK_THROWS_AS(required_length(10, -0.1), ConfigError);
}

TEST_CASE("symbol rendering") {
    CHECK(symbols_to_string(sy("01<")) == "01<");
    CHECK(to_display(CodeSymbol::Back) == "←");
    CHECK_THROWS_AS(symbols_from_string("01x"), EncodingError);
}

TEST_CASE("incremental state matches the batch definitions") {
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 500; ++trial) {
        Bits msg = test::random_bits(gen, gen() % 12);
        EccState st(msg);
        std::vector<CodeSymbol> y;
        for (int step = 0; step < 30; ++step) {
            REQUIRE(st.next() == next_symbol(msg, y));
            REQUIRE(st.last() == last_agree(msg, y));
            REQUIRE(st.suff() == wrong_suffix(msg, y));
            REQUIRE(st.potential() == potential(msg, y));
            REQUIRE(st.decoded() == decode(y));
            REQUIRE(st.complete() == !next_symbol(msg, y).has_value());
            auto s = gen() % 4 == 0 || !st.next() ? static_cast<CodeSymbol>(gen() % 3) : *st.next();
            y.push_back(s);
            st.push(s);
        }
    }
}

TEST_CASE("potential rises by one on the sent symbol and drops by at most one otherwise") {
    // Messages and receptions of length <= 6 here; the acceptance suite goes to 8.
    std::size_t violations = 0;
    for (std::size_t lm = 0; lm <= 6; ++lm) {
        for (const auto& msg : all_bit_strings(lm)) {
            for (std::size_t ly = 0; ly <= 6; ++ly) {
                for (auto y : all_codes(ly)) {
                    const long before = potential(msg, y);
                    const auto sent = next_symbol(msg, y);
                    for (CodeSymbol s : kCodeSymbols) {
                        y.push_back(s);
                        const long after = potential(msg, y);
                        y.pop_back();
                        if (sent && s == *sent) {
                            violations += after != before + 1;
                        } else {
                            violations += after < before - 1;
                        }
                    }
                }
            }
        }
    }
    CHECK(violations == 0);
}

TEST_CASE("corrupted symbols never cost more than two bits each") {
    // Adversary picks e error positions and substitutions; the message is long
    // enough that the transmission never completes.
    std::mt19937_64 gen(9);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t n = 1 + gen() % 40;
        Bits msg = test::random_bits(gen, n + 5);
        EccState st(msg);
        std::size_t errors = 0;
        for (std::size_t step = 0; step < n; ++step) {
            CodeSymbol sent = *st.next();
            if (gen() % 3 == 0) {
                st.push(static_cast<CodeSymbol>((static_cast<int>(sent) + 1 + gen() % 2) % 3));
                ++errors;
            } else {
                st.push(sent);
            }
        }
        REQUIRE(static_cast<long>(st.last()) >= static_cast<long>(n) - 2 * static_cast<long>(errors));
    }
}

TEST_CASE("sender stream for a message prefix is a prefix of the full stream") {
    std::mt19937_64 gen(33);
    for (int trial = 0; trial < 1000; ++trial) {
        Bits x = test::random_bits(gen, 1 + gen() % 30);
        const std::size_t k = gen() % (x.size() + 1);
        Bits head(x.begin(), x.begin() + static_cast<long>(k));
        const bool noisy = trial % 2 == 1;
        std::vector<int> corrupt(80);
        for (auto& c : corrupt) c = noisy && gen() % 5 == 0 ? 1 + static_cast<int>(gen() % 2) : 0;
        auto channel = [&](std::size_t step, std::optional<CodeSymbol> s) {
            int base = s ? static_cast<int>(*s) : 0;
            return static_cast<CodeSymbol>((base + corrupt[step]) % 3);
        };
        auto full = simulate_transmission(x, corrupt.size(), channel);
        auto part = simulate_transmission(head, corrupt.size(), channel);
        // The streams coincide as long as the prefix sender is still working
        // and the receiver holds at most k bits.
        std::size_t decoded_len = 0;
        for (std::size_t step = 0; step < corrupt.size(); ++step) {
            if (!part[step].sent || decoded_len > k) break;
            REQUIRE(full[step].sent == part[step].sent);
            decoded_len = part[step].decoded.size();
        }
        if (!noisy) {
            REQUIRE(full.size() >= k);
            for (std::size_t step = 0; step < k; ++step) REQUIRE(*full[step].sent == symbol_for_bit(x[step]));
        }
    }
}

TEST_CASE("trace dump") {
    Bits m{1, 0};
    auto trace = simulate_transmission(m, 4, [](std::size_t step, std::optional<CodeSymbol> s) {
        if (step == 1) return CodeSymbol::One;
        return s.value_or(CodeSymbol::Back);
    });
    CHECK(format_trace(trace) ==
          "0\t1\t1\t1\t1\n"
          "1\t0\t1\t0\t11\n"
          "2\t<\t<\t1\t1\n"
          "3\t0\t0\t2\t10\n");
    auto after = simulate_transmission(m, 3, [](std::size_t, std::optional<CodeSymbol> s) {
        return s.value_or(CodeSymbol::Back);
    });
    CHECK(format_trace(after) ==
          "0\t1\t1\t1\t1\n"
          "1\t0\t0\t2\t10\n"
          "2\t-\t<\t1\t1\n");
}
