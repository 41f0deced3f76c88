#include "steg/remote_model.hpp"

#include "steg/error.hpp"

#include <httplib.h>

#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <csignal>
#include <cstring>

extern char** environ;

namespace steg {

void check_error_frame(const nlohmann::json& frame) {
    if (!frame.is_object()) throw ProtocolError("response frame is not a JSON object");
    if (frame.contains("error")) {
        const auto& err = frame.at("error");
        std::string message = err.is_object() ? err.value("message", std::string("unknown error")) : err.dump();
        int code = err.is_object() ? err.value("code", 0) : 0;
        throw ProtocolError("model server error " + std::to_string(code) + ": " + message);
    }
}

TokenDistribution parse_distribution_frame(const nlohmann::json& frame, std::size_t vocab_size) {
    check_error_frame(frame);
    TokenDistribution dist;
    try {
        if (frame.contains("indices")) {
            if (frame.value("residual_uniform", false)) {
                throw ProtocolError("sparse frames with residual_uniform are not supported");
            }
            auto indices = frame.at("indices").get<std::vector<std::size_t>>();
            auto probs = frame.at("probs").get<std::vector<double>>();
            if (indices.size() != probs.size()) throw ProtocolError("sparse frame length mismatch");
            dist.probs.assign(vocab_size, 0.0);
            for (std::size_t k = 0; k < indices.size(); ++k) {
                if (indices[k] >= vocab_size) throw ProtocolError("sparse index outside the vocabulary");
                dist.probs[indices[k]] = probs[k];
            }
        } else {
            dist.probs = frame.at("probs").get<std::vector<double>>();
        }
        if (frame.contains("vocab_size") && frame.at("vocab_size").get<std::size_t>() != vocab_size) {
            throw ProtocolError("frame vocab_size disagrees with server info");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("malformed distribution frame: ") + e.what());
    }
    dist.validate(vocab_size);
    return dist;
}

// ---------------------------------------------------------------------------

HttpTransport::HttpTransport(std::string base_url, double timeout_seconds)
    : base_url_(std::move(base_url)), timeout_(timeout_seconds) {}

nlohmann::json HttpTransport::request(const std::string& method, const nlohmann::json& body) {
    httplib::Client client(base_url_);
    auto secs = static_cast<time_t>(timeout_);
    client.set_connection_timeout(secs, 0);
    client.set_read_timeout(secs, 0);
    const std::string path = "/v1/" + method;
    auto res = method == "info" ? client.Get(path) : client.Post(path, body.dump(), "application/json");
    if (!res) {
        throw ModelUnavailable("model server " + base_url_ + " unreachable: " + httplib::to_string(res.error()));
    }
    nlohmann::json frame;
    try {
        frame = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error&) {
        throw ProtocolError("model server returned non-JSON body (HTTP " + std::to_string(res->status) + ")");
    }
    check_error_frame(frame);
    if (res->status != 200) throw ProtocolError("model server returned HTTP " + std::to_string(res->status));
    return frame;
}

// ---------------------------------------------------------------------------

StdioTransport::StdioTransport(std::vector<std::string> command) {
    if (command.empty()) throw ConfigError("subprocess model needs a command");
    int fds[2];
    if (socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) {
        throw ModelUnavailable(std::string("socketpair failed: ") + std::strerror(errno));
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
    posix_spawn_file_actions_addclose(&actions, fds[0]);
    posix_spawn_file_actions_addclose(&actions, fds[1]);

    std::vector<char*> argv;
    for (auto& arg : command) argv.push_back(arg.data());
    argv.push_back(nullptr);

    pid_t pid = 0;
    int rc = posix_spawnp(&pid, argv[0], &actions, nullptr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(fds[1]);
    if (rc != 0) {
        ::close(fds[0]);
        throw ModelUnavailable("cannot start model subprocess '" + command[0] + "': " + std::strerror(rc));
    }
    fd_ = fds[0];
    pid_ = pid;
}

StdioTransport::~StdioTransport() {
    if (fd_ >= 0) {
        ::shutdown(fd_, SHUT_RDWR);
        ::close(fd_);
    }
    if (pid_ > 0) {
        int status = 0;
        if (waitpid(pid_, &status, WNOHANG) == 0) {
            ::kill(pid_, SIGTERM);
            waitpid(pid_, &status, 0);
        }
    }
}

std::string StdioTransport::read_line() {
    for (;;) {
        auto pos = buffer_.find('\n');
        if (pos != std::string::npos) {
            std::string line = buffer_.substr(0, pos);
            buffer_.erase(0, pos + 1);
            return line;
        }
        char chunk[4096];
        ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) throw ModelUnavailable("model subprocess closed its output");
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

nlohmann::json StdioTransport::request(const std::string& method, const nlohmann::json& body) {
    nlohmann::json req = body;
    req["method"] = method;
    std::string line = req.dump() + "\n";
    std::size_t sent = 0;
    while (sent < line.size()) {
        ssize_t n = ::send(fd_, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) throw ModelUnavailable("cannot write to model subprocess");
        sent += static_cast<std::size_t>(n);
    }
    nlohmann::json frame;
    try {
        frame = nlohmann::json::parse(read_line());
    } catch (const nlohmann::json::parse_error&) {
        throw ProtocolError("model subprocess wrote a non-JSON line");
    }
    check_error_frame(frame);
    return frame;
}

// ---------------------------------------------------------------------------

RemoteModel::RemoteModel(std::unique_ptr<ModelTransport> transport, std::string model_name)
    : transport_(std::move(transport)), model_name_(std::move(model_name)) {
    auto frame = transport_->request("info", nlohmann::json{{"model_name", model_name_}});
    try {
        info_.model_name = frame.value("model_name", model_name_);
        info_.vocab_size = frame.at("vocab_size").get<std::size_t>();
        if (frame.contains("done_token") && !frame.at("done_token").is_null()) {
            info_.done_token = frame.at("done_token").get<TokenId>();
        }
        info_.temperature = frame.value("temperature", 1.0);
        if (frame.contains("top_k") && !frame.at("top_k").is_null()) info_.top_k = frame.at("top_k").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("malformed info frame: ") + e.what());
    }
    token_width(info_.vocab_size);
    set_done_token(info_.done_token);
}

TokenDistribution RemoteModel::next_token_dist(std::string_view prompt, std::span<const TokenId> generated) {
    std::vector<TokenId> key(generated.begin(), generated.end());
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    auto frame = transport_->request("distribution", nlohmann::json{{"prompt", std::string(prompt)},
                                                                     {"tokens", key},
                                                                     {"model_name", model_name_}});
    auto dist = parse_distribution_frame(frame, info_.vocab_size);
    cache_.emplace(std::move(key), dist);
    return dist;
}

std::optional<std::string> RemoteModel::detokenize(std::span<const TokenId> tokens) {
    auto frame = transport_->request(
        "decode", nlohmann::json{{"tokens", std::vector<TokenId>(tokens.begin(), tokens.end())},
                                 {"model_name", model_name_}});
    try {
        return frame.at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("malformed decode frame: ") + e.what());
    }
}

std::vector<TokenId> RemoteModel::encode(std::string_view text) {
    auto frame = transport_->request("encode", nlohmann::json{{"text", std::string(text)}, {"model_name", model_name_}});
    try {
        return frame.at("tokens").get<std::vector<TokenId>>();
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("malformed encode frame: ") + e.what());
    }
}

} // namespace steg
