#pragma once
// Test-only oracles and doubles. Nothing here calls into the code under test
// for the quantity it is meant to check.

#include "steg/dynamic_ecc.hpp"
#include "steg/keyed_randomness.hpp"
#include "steg/model.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace steg::test {

// Literal recursive definition: decode(y || s) = decode(y) || s for a bit,
// decode(y) minus its last bit for a backspace (unless empty).
inline Bits decode_recursive(std::span<const CodeSymbol> y) {
    if (y.empty()) return {};
    Bits head = decode_recursive(y.first(y.size() - 1));
    switch (y.back()) {
    case CodeSymbol::Zero: head.push_back(0); break;
    case CodeSymbol::One: head.push_back(1); break;
    case CodeSymbol::Back:
        if (!head.empty()) head.pop_back();
        break;
    }
    return head;
}

inline std::size_t prefix_scan(BitSpan a, BitSpan b) {
    std::size_t best = 0;
    for (std::size_t i = 0; i <= std::min(a.size(), b.size()); ++i) {
        if (std::equal(a.begin(), a.begin() + static_cast<long>(i), b.begin())) best = i;
    }
    return best;
}

/// Every sequence over {0,1,<-} of exactly `n` symbols, via base-3 counting.
inline std::vector<std::vector<CodeSymbol>> all_codes(std::size_t n) {
    std::size_t total = 1;
    for (std::size_t k = 0; k < n; ++k) total *= 3;
    std::vector<std::vector<CodeSymbol>> out;
    out.reserve(total);
    for (std::size_t v = 0; v < total; ++v) {
        std::vector<CodeSymbol> y(n);
        std::size_t x = v;
        for (std::size_t k = 0; k < n; ++k, x /= 3) y[k] = static_cast<CodeSymbol>(x % 3);
        out.push_back(std::move(y));
    }
    return out;
}

inline std::vector<Bits> all_bit_strings(std::size_t n) {
    std::vector<Bits> out;
    for (std::size_t v = 0; v < (std::size_t{1} << n); ++v) {
        Bits b(n);
        for (std::size_t k = 0; k < n; ++k) b[k] = static_cast<Bit>((v >> (n - 1 - k)) & 1U);
        out.push_back(std::move(b));
    }
    return out;
}

inline Bits random_bits(std::mt19937_64& gen, std::size_t n) {
    Bits b(n);
    for (auto& x : b) x = static_cast<Bit>(gen() & 1U);
    return b;
}

/// Kolmogorov-Smirnov distance between the sample and a continuous CDF.
template <typename Cdf>
double ks_distance(std::vector<double> xs, Cdf cdf) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = cdf(xs[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

inline double mean(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

/// Total variation distance between two empirical histograms.
inline double total_variation(const std::map<std::uint64_t, std::size_t>& a, std::size_t na,
                              const std::map<std::uint64_t, std::size_t>& b, std::size_t nb) {
    std::map<std::uint64_t, std::pair<double, double>> joint;
    for (auto [k, c] : a) joint[k].first = static_cast<double>(c) / static_cast<double>(na);
    for (auto [k, c] : b) joint[k].second = static_cast<double>(c) / static_cast<double>(nb);
    double tv = 0.0;
    for (auto& [k, v] : joint) tv += std::abs(v.first - v.second);
    return tv / 2.0;
}

/// Pearson chi-square homogeneity statistic for two histograms, with its
/// degrees of freedom (cells seen in either sample, minus one).
inline std::pair<double, std::size_t> chi_square_homogeneity(const std::map<std::uint64_t, std::size_t>& a,
                                                             std::size_t na,
                                                             const std::map<std::uint64_t, std::size_t>& b,
                                                             std::size_t nb) {
    std::map<std::uint64_t, std::pair<double, double>> joint;
    for (auto [k, c] : a) joint[k].first = static_cast<double>(c);
    for (auto [k, c] : b) joint[k].second = static_cast<double>(c);
    const double n1 = static_cast<double>(na), n2 = static_cast<double>(nb), n = n1 + n2;
    double stat = 0.0;
    for (auto& [k, v] : joint) {
        const double tot = v.first + v.second;
        const double e1 = tot * n1 / n, e2 = tot * n2 / n;
        stat += (v.first - e1) * (v.first - e1) / e1 + (v.second - e2) * (v.second - e2) / e2;
    }
    return {stat, joint.empty() ? 0 : joint.size() - 1};
}

/// Lazily sampled truly random function: every new input gets a fresh
/// uniform from a seeded stream, repeated inputs get the stored answer.
class RandomOracle final : public Prf {
public:
    struct Query {
        PrfInput input;
        Unit value;
        bool fresh = false;
    };

    explicit RandomOracle(std::uint64_t seed) : gen_(seed) {}

    Unit eval(const PrfInput& input) const override {
        auto key = serialize(input);
        auto [it, inserted] = table_.try_emplace(std::move(key), Unit{});
        if (inserted) it->second = Unit(gen_());
        log_.push_back({input, it->second, inserted});
        return it->second;
    }

    const std::vector<Query>& log() const { return log_; }

private:
    mutable std::mt19937_64 gen_;
    mutable std::map<std::vector<std::uint8_t>, Unit> table_;
    mutable std::vector<Query> log_;
};

/// Plays back a fixed list of uniforms through the RandomSource interface.
class ReplayRandom final : public RandomSource {
public:
    explicit ReplayRandom(std::vector<Unit> values) : values_(std::move(values)) {}
    void fill(std::span<std::uint8_t> out) override {
        if (out.size() != 8 || next_ >= values_.size()) throw std::out_of_range("replay exhausted");
        std::uint64_t v = values_[next_++].raw();
        for (int k = 7; k >= 0; --k, v >>= 8) out[static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(v & 0xFF);
    }
    std::size_t consumed() const { return next_; }

private:
    std::vector<Unit> values_;
    std::size_t next_ = 0;
};

/// Always returns the same distribution; width follows from its size.
class FixedModel final : public Model {
public:
    FixedModel(std::vector<double> probs, std::size_t max_len) : probs_(std::move(probs)), max_len_(max_len) {}
    std::size_t vocab_size() const override { return probs_.size(); }
    std::optional<std::size_t> max_len() const override { return max_len_; }
    TokenDistribution next_token_dist(std::string_view, std::span<const TokenId>) override { return {probs_}; }

private:
    std::vector<double> probs_;
    std::size_t max_len_;
};

/// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("steg-test-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

} // namespace steg::test
