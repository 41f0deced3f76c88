#pragma once

#include "steg/models.hpp"
#include "steg/steganography.hpp"
#include "steg/transcript.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace steg {

struct CapacityPoint {
    std::size_t response_len_tokens = 0;
    double mean_recovered_bits = 0.0;
    std::size_t trials = 0;
    double stderr_bits = 0.0;
    std::optional<std::string> error; // set when some trials failed

    friend bool operator==(const CapacityPoint&, const CapacityPoint&) = default;
};

enum class Scheme { OneQuery, Full };

struct CapacityOptions {
    std::vector<std::size_t> lengths;
    std::size_t trials_per_length = 100;
    StegConfig config;
    Scheme scheme = Scheme::OneQuery;
    std::string prompt;
    /// Deterministic keys, payloads and entropy-phase randomness when set.
    std::optional<std::uint64_t> seed;
    std::size_t workers = 1;
};

/// Per-trial matched-prefix lengths, kept for regression.
struct CapacityResult {
    std::vector<CapacityPoint> points;
    std::vector<std::pair<std::size_t, std::size_t>> samples; // (length, recovered bits)
};

/// Builds a fresh model capped at the given number of tokens.
using ModelFactory = std::function<std::unique_ptr<Model>(std::size_t max_len)>;

ModelFactory factory_from_config(const ModelConfig& config);

/// For every length: embed a random payload as long as the response with a
/// fresh key, retrieve, and record the longest matching payload prefix.
CapacityResult capacity_sweep(const ModelFactory& make_model, const CapacityOptions& options);

/// Header "length,trials,mean_bits,stderr"; full round-trip precision.
void write_capacity_csv(std::ostream& out, const std::vector<CapacityPoint>& points);
std::vector<CapacityPoint> read_capacity_csv(std::istream& in);

/// gnuplot script plotting `csv_path`.
std::string gnuplot_script(const std::string& csv_path);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double slope_p_value = 1.0; // two-sided t-test of slope == 0
};

/// Least squares; needs at least three points with distinct x.
LinearFit linear_fit(std::span<const double> xs, std::span<const double> ys);

struct WindowStats {
    std::size_t r0 = 0;
    double min_window_sum = 0.0; // over windows of exactly r0 tokens; 0 if shorter
    SaturationResult saturation;
};

struct EntropyProfile {
    std::vector<double> per_token;
    std::vector<double> cumulative;
    double total = 0.0;
    double slope = 0.0; // least-squares growth of cumulative entropy per token
    std::vector<WindowStats> windows;
};

inline constexpr std::size_t kDefaultSaturationWindowValues[] = {8, 32, 128};
inline constexpr std::span<const std::size_t> kDefaultSaturationWindows{kDefaultSaturationWindowValues};

EntropyProfile entropy_profile(const Transcript& t, std::span<const std::size_t> r0s = kDefaultSaturationWindows);

nlohmann::json to_json(const EntropyProfile& p);

} // namespace steg
