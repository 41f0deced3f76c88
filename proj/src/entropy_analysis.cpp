#include "steg/entropy_analysis.hpp"

#include "steg/error.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <atomic>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

namespace steg {

ModelFactory factory_from_config(const ModelConfig& config) {
    return [config](std::size_t max_len) {
        ModelConfig c = config;
        c.max_len = max_len;
        return make_model(c);
    };
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

struct TrialOutcome {
    std::size_t recovered = 0;
    std::optional<std::string> error;
};

TrialOutcome run_trial(const ModelFactory& make_model, const CapacityOptions& opt, std::size_t length,
                       std::size_t trial) {
    std::unique_ptr<RandomSource> rng;
    if (opt.seed) {
        rng = std::make_unique<SeededRandom>(splitmix(splitmix(*opt.seed ^ (length * 0x100000001b3ULL)) + trial));
    } else {
        rng = std::make_unique<SystemRandom>();
    }
    try {
        auto model = make_model(length);
        const std::size_t width = token_width(model->vocab_size());
        SecretKey key = setup(128, *rng);
        HmacPrf prf(key);
        Bits payload(length * width);
        for (auto& b : payload) b = static_cast<Bit>(rng->next_u64() & 1U);

        Bits retrieved;
        if (opt.scheme == Scheme::OneQuery) {
            Transcript t = steg_generate_one(prf, *model, opt.prompt, payload, opt.config);
            retrieved = steg_retrieve_one(prf, t.bits, opt.config, width).payload;
        } else {
            Transcript t = steg_generate(prf, *model, opt.prompt, payload, opt.config, *rng);
            if (auto r = steg_retrieve(prf, t.bits, opt.config, width)) retrieved = std::move(r->payload);
        }
        return {common_prefix(payload, retrieved), std::nullopt};
    } catch (const ModelUnavailable& e) {
        return {0, std::string(e.what())};
    } catch (const ProtocolError& e) {
        return {0, std::string(e.what())};
    }
}

} // namespace

CapacityResult capacity_sweep(const ModelFactory& make_model, const CapacityOptions& opt) {
    if (opt.trials_per_length < 1) throw ConfigError("trials_per_length must be at least 1");
    struct Job {
        std::size_t length;
        std::size_t trial;
    };
    std::vector<Job> jobs;
    for (std::size_t len : opt.lengths) {
        for (std::size_t k = 0; k < opt.trials_per_length; ++k) jobs.push_back({len, k});
    }
    std::vector<TrialOutcome> outcomes(jobs.size());
    std::atomic<std::size_t> cursor{0};
    auto worker = [&] {
        for (std::size_t idx = cursor++; idx < jobs.size(); idx = cursor++) {
            outcomes[idx] = run_trial(make_model, opt, jobs[idx].length, jobs[idx].trial);
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(opt.workers, jobs.size()));
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    CapacityResult result;
    std::size_t idx = 0;
    for (std::size_t len : opt.lengths) {
        std::vector<double> values;
        std::optional<std::string> error;
        for (std::size_t k = 0; k < opt.trials_per_length; ++k, ++idx) {
            const auto& o = outcomes[idx];
            if (o.error) {
                if (!error) error = *o.error;
                continue;
            }
            values.push_back(static_cast<double>(o.recovered));
            result.samples.emplace_back(len, o.recovered);
        }
        CapacityPoint p;
        p.response_len_tokens = len;
        p.trials = values.size();
        if (!values.empty()) {
            const double n = static_cast<double>(values.size());
            p.mean_recovered_bits = std::accumulate(values.begin(), values.end(), 0.0) / n;
            if (values.size() > 1) {
                double ss = 0.0;
                for (double v : values) ss += (v - p.mean_recovered_bits) * (v - p.mean_recovered_bits);
                p.stderr_bits = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
            }
        }
        if (error) {
            p.error = std::to_string(opt.trials_per_length - values.size()) + " trial(s) failed: " + *error;
        }
        result.points.push_back(std::move(p));
    }
    return result;
}

void write_capacity_csv(std::ostream& out, const std::vector<CapacityPoint>& points) {
    out << "length,trials,mean_bits,stderr\n";
    std::ostringstream line;
    line << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& p : points) {
        line.str({});
        line << p.response_len_tokens << ',' << p.trials << ',' << p.mean_recovered_bits << ',' << p.stderr_bits
             << '\n';
        out << line.str();
    }
}

std::vector<CapacityPoint> read_capacity_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("length,trials,mean_bits,stderr", 0) != 0) {
        throw EncodingError("capacity CSV is missing its header");
    }
    std::vector<CapacityPoint> points;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string cell[4];
        for (auto& c : cell) {
            if (!std::getline(fields, c, ',')) throw EncodingError("capacity CSV row has fewer than 4 columns");
        }
        try {
            CapacityPoint p;
            p.response_len_tokens = std::stoull(cell[0]);
            p.trials = std::stoull(cell[1]);
            p.mean_recovered_bits = std::stod(cell[2]);
            p.stderr_bits = std::stod(cell[3]);
            points.push_back(p);
        } catch (const std::logic_error&) {
            throw EncodingError("capacity CSV row is not numeric: " + line);
        }
    }
    return points;
}

std::string gnuplot_script(const std::string& csv_path) {
    std::ostringstream s;
    s << "set datafile separator ','\n"
      << "set xlabel 'Response length (tokens)'\n"
      << "set ylabel 'Recovered payload bits'\n"
      << "set grid\n"
      << "plot '" << csv_path << "' every ::1 using 1:3:4 with yerrorlines title 'mean recovered bits'\n";
    return s.str();
}

LinearFit linear_fit(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.size() < 3) throw ConfigError("linear fit needs at least three points");
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0) throw ConfigError("linear fit needs distinct x values");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    const double sse = std::max(0.0, syy - fit.slope * sxy);
    fit.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
    const double dof = n - 2.0;
    const double se = std::sqrt(sse / dof / sxx);
    if (se == 0.0) {
        fit.slope_p_value = fit.slope == 0.0 ? 1.0 : 0.0;
    } else {
        boost::math::students_t dist(dof);
        fit.slope_p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(fit.slope / se)));
    }
    return fit;
}

EntropyProfile entropy_profile(const Transcript& t, std::span<const std::size_t> r0s) {
    if (t.per_bit.size() != t.bits.size()) throw ConfigError("transcript lacks per-bit entropy records");
    const std::size_t width = std::max<std::size_t>(1, t.token_width);
    EntropyProfile p;
    for (std::size_t i = 0; i < t.per_bit.size(); ++i) {
        if (i % width == 0) p.per_token.push_back(0.0);
        p.per_token.back() += t.per_bit[i].entropy;
    }
    double running = 0.0;
    for (double h : p.per_token) p.cumulative.push_back(running += h);
    p.total = running;
    if (p.per_token.size() >= 3) {
        std::vector<double> xs(p.per_token.size());
        std::iota(xs.begin(), xs.end(), 1.0);
        p.slope = linear_fit(xs, p.cumulative).slope;
    } else if (!p.per_token.empty()) {
        p.slope = p.total / static_cast<double>(p.per_token.size());
    }
    for (std::size_t r0 : r0s) {
        WindowStats w;
        w.r0 = r0;
        if (p.per_token.size() >= r0) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t s = 0; s + r0 <= p.per_token.size(); ++s) {
                double prev = s == 0 ? 0.0 : p.cumulative[s - 1];
                best = std::min(best, p.cumulative[s + r0 - 1] - prev);
            }
            w.min_window_sum = best;
        }
        w.saturation = saturation_check(p.per_token, r0);
        p.windows.push_back(w);
    }
    return p;
}

nlohmann::json to_json(const EntropyProfile& p) {
    nlohmann::json windows = nlohmann::json::array();
    for (const auto& w : p.windows) {
        nlohmann::json e{{"r0", w.r0}, {"min_window_sum", w.min_window_sum}, {"saturated", w.saturation.saturated}};
        if (w.saturation.first_violation) {
            e["first_violation"] = {{"start", w.saturation.first_violation->first},
                                    {"length", w.saturation.first_violation->second}};
        }
        windows.push_back(std::move(e));
    }
    return nlohmann::json{{"per_token", p.per_token}, {"cumulative", p.cumulative}, {"total", p.total},
                          {"slope", p.slope},         {"windows", std::move(windows)}};
}

} // namespace steg
