#pragma once

// Concrete models: toy models, trace replay, trace recording and the
// JSON model configuration that selects between them.

#include "steg/model.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <memory>

namespace steg {

/// Shared termination settings and the digest of the originating config.
class ConfiguredModel : public Model {
public:
    std::optional<TokenId> done_token() const override { return done_token_; }
    std::optional<std::size_t> max_len() const override { return max_len_; }
    std::string config_digest() const override { return digest_; }

    void set_done_token(std::optional<TokenId> t) { done_token_ = t; }
    void set_max_len(std::optional<std::size_t> n) { max_len_ = n; }
    void set_config_digest(std::string d) { digest_ = std::move(d); }

private:
    std::optional<TokenId> done_token_;
    std::optional<std::size_t> max_len_;
    std::string digest_;
};

/// Context-free two-token model emitting token 1 with probability p.
class CoinModel final : public ConfiguredModel {
public:
    explicit CoinModel(double p, std::optional<std::size_t> max_len = std::nullopt);
    std::size_t vocab_size() const override { return 2; }
    TokenDistribution next_token_dist(std::string_view, std::span<const TokenId>) override;

private:
    double p_;
};

/// Context-free uniform distribution over `vocab_size` tokens.
class UniformModel final : public ConfiguredModel {
public:
    explicit UniformModel(std::size_t vocab_size, std::optional<std::size_t> max_len = std::nullopt);
    std::size_t vocab_size() const override { return vocab_; }
    TokenDistribution next_token_dist(std::string_view, std::span<const TokenId>) override;

private:
    std::size_t vocab_;
};

/// First-order Markov chain: row `t` is the distribution after token t,
/// `initial` is used for the first token.
class MarkovModel final : public ConfiguredModel {
public:
    MarkovModel(std::vector<std::vector<double>> transitions, std::vector<double> initial,
                std::optional<std::size_t> max_len = std::nullopt);
    std::size_t vocab_size() const override { return initial_.size(); }
    TokenDistribution next_token_dist(std::string_view, std::span<const TokenId> generated) override;

private:
    std::vector<std::vector<double>> transitions_;
    std::vector<double> initial_;
};

/// Replays a recorded distribution trace (JSON lines {"probs": [...]}):
/// call n returns line n whatever the context. The trace length caps the response.
class ReplayModel final : public ConfiguredModel {
public:
    explicit ReplayModel(std::vector<TokenDistribution> trace);
    static ReplayModel from_file(const std::filesystem::path& path);

    std::size_t vocab_size() const override { return vocab_; }
    std::optional<std::size_t> max_len() const override;
    TokenDistribution next_token_dist(std::string_view, std::span<const TokenId> generated) override;

private:
    std::vector<TokenDistribution> trace_;
    std::size_t vocab_ = 0;
};

/// Wraps a model and appends every distribution it serves to a trace file.
class RecordingModel final : public Model {
public:
    RecordingModel(Model& inner, const std::filesystem::path& trace_path);

    std::size_t vocab_size() const override { return inner_.vocab_size(); }
    std::optional<TokenId> done_token() const override { return inner_.done_token(); }
    std::optional<std::size_t> max_len() const override { return inner_.max_len(); }
    void begin_session() override { inner_.begin_session(); }
    std::optional<std::string> detokenize(std::span<const TokenId> tokens) override {
        return inner_.detokenize(tokens);
    }
    std::string config_digest() const override { return inner_.config_digest(); }
    TokenDistribution next_token_dist(std::string_view prompt, std::span<const TokenId> generated) override;

private:
    Model& inner_;
    std::ofstream out_;
};

std::vector<TokenDistribution> read_trace(const std::filesystem::path& path);
void write_trace_line(std::ostream& out, const TokenDistribution& dist);

/// {"type": "coin"|"markov"|"uniform"|"replay"|"remote"|"subprocess",
///  "params": {...}, "vocab_size": int, "done_token": int|null, "max_len": int}
struct ModelConfig {
    std::string type;
    nlohmann::json params = nlohmann::json::object();
    std::optional<std::size_t> vocab_size;
    std::optional<TokenId> done_token;
    std::optional<std::size_t> max_len;

    static ModelConfig from_json(const nlohmann::json& j);
    static ModelConfig load(const std::filesystem::path& path);
    nlohmann::json to_json() const;

    /// SHA-256 of the canonical JSON form.
    std::string digest() const;
};

/// Throws ConfigError on unknown types or bad parameters.
std::unique_ptr<Model> make_model(const ModelConfig& config);

} // namespace steg
