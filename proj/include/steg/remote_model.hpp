#pragma once

// Client side of the model-server wire protocol.
//
// HTTP:   GET /v1/info, POST /v1/distribution, /v1/encode, /v1/decode
// stdio:  one JSON object per line, {"method": "<name>", ...body}, one
//         response object per line.
//
// Request bodies:
//   distribution  {"prompt": str, "tokens": [int], "model_name": str}
//   encode        {"text": str, "model_name": str}
//   decode        {"tokens": [int], "model_name": str}
// Response bodies:
//   distribution  {"probs": [float], "vocab_size": int, "done_token": int|null}
//                 or sparse {"indices": [int], "probs": [float], "residual_uniform": false, ...}
//   encode        {"tokens": [int]}
//   decode        {"text": str}
//   info          {"model_name": str, "vocab_size": int, "done_token": int|null,
//                  "temperature": float, "top_k": int|null}
//   any error     {"error": {"code": int, "message": str}}

#include "steg/models.hpp"

#include <json.hpp>

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace steg {

class ModelTransport {
public:
    virtual ~ModelTransport() = default;
    /// Throws ModelUnavailable on transport failure, ProtocolError on error frames.
    virtual nlohmann::json request(const std::string& method, const nlohmann::json& body) = 0;
};

class HttpTransport final : public ModelTransport {
public:
    HttpTransport(std::string base_url, double timeout_seconds = 30.0);
    nlohmann::json request(const std::string& method, const nlohmann::json& body) override;

private:
    std::string base_url_;
    double timeout_;
};

/// Spawns `command` and speaks the stdio JSON-lines protocol with it.
class StdioTransport final : public ModelTransport {
public:
    explicit StdioTransport(std::vector<std::string> command);
    ~StdioTransport() override;
    StdioTransport(const StdioTransport&) = delete;
    StdioTransport& operator=(const StdioTransport&) = delete;

    nlohmann::json request(const std::string& method, const nlohmann::json& body) override;

private:
    std::string read_line();

    int fd_ = -1;
    int pid_ = -1;
    std::string buffer_;
};

/// Turns a distribution response frame into a validated distribution.
/// Throws ProtocolError for error frames or malformed/unnormalized payloads.
TokenDistribution parse_distribution_frame(const nlohmann::json& frame, std::size_t vocab_size);

/// Throws ProtocolError if `frame` is an error frame.
void check_error_frame(const nlohmann::json& frame);

struct ServerInfo {
    std::string model_name;
    std::size_t vocab_size = 0;
    std::optional<TokenId> done_token;
    double temperature = 1.0;
    std::optional<std::size_t> top_k;
};

class RemoteModel final : public ConfiguredModel {
public:
    /// Queries the info frame immediately.
    RemoteModel(std::unique_ptr<ModelTransport> transport, std::string model_name);

    std::size_t vocab_size() const override { return info_.vocab_size; }
    const ServerInfo& info() const { return info_; }

    TokenDistribution next_token_dist(std::string_view prompt, std::span<const TokenId> generated) override;
    void begin_session() override { cache_.clear(); }
    std::optional<std::string> detokenize(std::span<const TokenId> tokens) override;
    std::vector<TokenId> encode(std::string_view text);

private:
    std::unique_ptr<ModelTransport> transport_;
    std::string model_name_;
    ServerInfo info_;
    std::map<std::vector<TokenId>, TokenDistribution> cache_;
};

} // namespace steg
