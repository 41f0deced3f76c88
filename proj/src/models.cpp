#include "steg/models.hpp"

#include "steg/error.hpp"
#include "steg/remote_model.hpp"

#include <cmath>

namespace steg {

CoinModel::CoinModel(double p, std::optional<std::size_t> max_len) : p_(p) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("coin probability must lie in [0,1]");
    set_max_len(max_len);
}

TokenDistribution CoinModel::next_token_dist(std::string_view, std::span<const TokenId>) {
    return {{1.0 - p_, p_}};
}

UniformModel::UniformModel(std::size_t vocab_size, std::optional<std::size_t> max_len) : vocab_(vocab_size) {
    token_width(vocab_size);
    set_max_len(max_len);
}

TokenDistribution UniformModel::next_token_dist(std::string_view, std::span<const TokenId>) {
    return {std::vector<double>(vocab_, 1.0 / static_cast<double>(vocab_))};
}

MarkovModel::MarkovModel(std::vector<std::vector<double>> transitions, std::vector<double> initial,
                         std::optional<std::size_t> max_len)
    : transitions_(std::move(transitions)), initial_(std::move(initial)) {
    token_width(initial_.size());
    if (transitions_.size() != initial_.size()) {
        throw ConfigError("markov model needs one transition row per token");
    }
    try {
        TokenDistribution{initial_}.validate(initial_.size());
        for (const auto& row : transitions_) TokenDistribution{row}.validate(initial_.size());
    } catch (const ProtocolError& e) {
        throw ConfigError(std::string("markov model: ") + e.what());
    }
    set_max_len(max_len);
}

TokenDistribution MarkovModel::next_token_dist(std::string_view, std::span<const TokenId> generated) {
    if (generated.empty()) return {initial_};
    TokenId last = generated.back();
    if (last >= transitions_.size()) throw EncodingError("token id out of range for markov model");
    return {transitions_[last]};
}

ReplayModel::ReplayModel(std::vector<TokenDistribution> trace) : trace_(std::move(trace)) {
    if (trace_.empty()) throw ConfigError("replay trace is empty");
    vocab_ = trace_.front().probs.size();
    token_width(vocab_);
    for (const auto& d : trace_) d.validate(vocab_);
}

ReplayModel ReplayModel::from_file(const std::filesystem::path& path) { return ReplayModel(read_trace(path)); }

std::optional<std::size_t> ReplayModel::max_len() const {
    auto configured = ConfiguredModel::max_len();
    if (configured) return std::min(*configured, trace_.size());
    return trace_.size();
}

TokenDistribution ReplayModel::next_token_dist(std::string_view, std::span<const TokenId> generated) {
    if (generated.size() >= trace_.size()) throw ModelUnavailable("replay trace exhausted");
    return trace_[generated.size()];
}

std::vector<TokenDistribution> read_trace(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read trace file " + path.string());
    std::vector<TokenDistribution> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = nlohmann::json::parse(line);
            out.push_back({j.at("probs").get<std::vector<double>>()});
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("malformed trace line in " + path.string() + ": " + e.what());
        }
    }
    return out;
}

void write_trace_line(std::ostream& out, const TokenDistribution& dist) {
    out << nlohmann::json{{"probs", dist.probs}}.dump() << '\n';
}

RecordingModel::RecordingModel(Model& inner, const std::filesystem::path& trace_path)
    : inner_(inner), out_(trace_path, std::ios::trunc) {
    if (!out_) throw ConfigError("cannot write trace file " + trace_path.string());
}

TokenDistribution RecordingModel::next_token_dist(std::string_view prompt, std::span<const TokenId> generated) {
    auto dist = inner_.next_token_dist(prompt, generated);
    write_trace_line(out_, dist);
    out_.flush();
    return dist;
}

// ---------------------------------------------------------------------------

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    try {
        ModelConfig c;
        c.type = j.at("type").get<std::string>();
        if (j.contains("params") && !j.at("params").is_null()) c.params = j.at("params");
        if (j.contains("vocab_size") && !j.at("vocab_size").is_null()) c.vocab_size = j.at("vocab_size").get<std::size_t>();
        if (j.contains("done_token") && !j.at("done_token").is_null()) c.done_token = j.at("done_token").get<TokenId>();
        if (j.contains("max_len") && !j.at("max_len").is_null()) c.max_len = j.at("max_len").get<std::size_t>();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed model config: ") + e.what());
    }
}

ModelConfig ModelConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read model config " + path.string());
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("model config " + path.string() + " is not JSON: " + e.what());
    }
}

nlohmann::json ModelConfig::to_json() const {
    nlohmann::json j{{"type", type}, {"params", params}};
    j["vocab_size"] = vocab_size ? nlohmann::json(*vocab_size) : nlohmann::json(nullptr);
    j["done_token"] = done_token ? nlohmann::json(*done_token) : nlohmann::json(nullptr);
    j["max_len"] = max_len ? nlohmann::json(*max_len) : nlohmann::json(nullptr);
    return j;
}

std::string ModelConfig::digest() const { return sha256_hex(to_json().dump()); }

namespace {

template <typename T>
T param(const nlohmann::json& params, const char* name) {
    try {
        return params.at(name).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model parameter '") + name + "': " + e.what());
    }
}

void check_vocab(const ModelConfig& c, std::size_t actual) {
    if (c.vocab_size && *c.vocab_size != actual) {
        throw ConfigError("vocab_size " + std::to_string(*c.vocab_size) + " does not match model (" +
                          std::to_string(actual) + ")");
    }
    if (c.done_token && *c.done_token >= actual) throw ConfigError("done_token outside the vocabulary");
}

} // namespace

std::unique_ptr<Model> make_model(const ModelConfig& c) {
    std::unique_ptr<ConfiguredModel> model;
    if (c.type == "coin") {
        model = std::make_unique<CoinModel>(param<double>(c.params, "p"));
    } else if (c.type == "uniform") {
        if (!c.vocab_size) throw ConfigError("uniform model needs vocab_size");
        model = std::make_unique<UniformModel>(*c.vocab_size);
    } else if (c.type == "markov") {
        auto rows = param<std::vector<std::vector<double>>>(c.params, "transitions");
        std::vector<double> initial;
        if (c.params.contains("initial")) {
            initial = param<std::vector<double>>(c.params, "initial");
        } else {
            initial.assign(rows.size(), rows.empty() ? 0.0 : 1.0 / static_cast<double>(rows.size()));
        }
        model = std::make_unique<MarkovModel>(std::move(rows), std::move(initial));
    } else if (c.type == "replay") {
        model = std::make_unique<ReplayModel>(ReplayModel::from_file(param<std::string>(c.params, "path")));
    } else if (c.type == "remote") {
        model = std::make_unique<RemoteModel>(
            std::make_unique<HttpTransport>(param<std::string>(c.params, "url"),
                                            c.params.value("timeout_seconds", 30.0)),
            c.params.value("model_name", std::string("gpt2")));
    } else if (c.type == "subprocess") {
        model = std::make_unique<RemoteModel>(
            std::make_unique<StdioTransport>(param<std::vector<std::string>>(c.params, "command")),
            c.params.value("model_name", std::string("gpt2")));
    } else {
        throw ConfigError("unknown model type '" + c.type + "'");
    }
    check_vocab(c, model->vocab_size());
    if (c.done_token) model->set_done_token(c.done_token);
    if (c.max_len) model->set_max_len(c.max_len);
    model->set_config_digest(c.digest());
    return model;
}

} // namespace steg
