#include "steg/error.hpp"
#include "steg/models.hpp"
#include "steg/remote_model.hpp"
#include "steg/steganography.hpp"

#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <thread>

using namespace steg;
using nlohmann::json;

namespace {

// In-process stand-in for the HTTP model server. Three tokens plus done.
class FakeServer {
public:
    FakeServer() {
        svr_.Get("/v1/info", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(json{{"model_name", "fake"}, {"vocab_size", 4}, {"done_token", 3}, {"temperature", 1.0},
                                 {"top_k", nullptr}}
                                .dump(),
                            "application/json");
        });
        svr_.Post("/v1/distribution", [this](const httplib::Request& req, httplib::Response& res) {
            ++distribution_calls;
            auto body = json::parse(req.body);
            json out;
            for (auto t : body.at("tokens")) {
                if (t.get<int>() < 0 || t.get<int>() >= 4) {
                    res.set_content(json{{"error", {{"code", 400}, {"message", "token id out of range"}}}}.dump(),
                                    "application/json");
                    return;
                }
            }
            const std::string mode = body.at("prompt");
            if (mode == "sparse") {
                out = {{"indices", {0, 2}}, {"probs", {0.25, 0.75}}, {"residual_uniform", false}, {"vocab_size", 4}};
            } else if (mode == "residual") {
                out = {{"indices", {0}}, {"probs", {0.5}}, {"residual_uniform", true}, {"vocab_size", 4}};
            } else if (mode == "unnormalized") {
                out = {{"probs", {0.5, 0.5, 0.5, 0.0}}, {"vocab_size", 4}, {"done_token", 3}};
            } else if (mode == "status") {
                res.status = 500;
                res.set_content("boom", "text/plain");
                return;
            } else {
                out = {{"probs", {0.1, 0.2, 0.3, 0.4}}, {"vocab_size", 4}, {"done_token", 3}};
            }
            res.set_content(out.dump(), "application/json");
        });
        svr_.Post("/v1/encode", [](const httplib::Request& req, httplib::Response& res) {
            auto text = json::parse(req.body).at("text").get<std::string>();
            json tokens = json::array();
            for (char c : text) tokens.push_back(c - 'a');
            res.set_content(json{{"tokens", tokens}}.dump(), "application/json");
        });
        svr_.Post("/v1/decode", [](const httplib::Request& req, httplib::Response& res) {
            std::string text;
            const auto body = json::parse(req.body);
            for (auto t : body.at("tokens")) text.push_back(static_cast<char>('a' + t.get<int>()));
            res.set_content(json{{"text", text}}.dump(), "application/json");
        });
        port_ = svr_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { svr_.listen_after_bind(); });
        svr_.wait_until_ready();
    }
    ~FakeServer() {
        svr_.stop();
        thread_.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

    std::atomic<int> distribution_calls{0};

private:
    httplib::Server svr_;
    int port_ = 0;
    std::thread thread_;
};

RemoteModel http_model(const FakeServer& s) {
    return RemoteModel(std::make_unique<HttpTransport>(s.url(), 5.0), "fake");
}

std::vector<std::string> fixture_command() { return {STEG_PYTHON, STEG_FAKE_SERVER}; }

} // namespace

TEST_CASE("distribution frames: dense, sparse and rejected shapes") {
    auto dense = parse_distribution_frame(json{{"probs", {0.25, 0.75}}, {"vocab_size", 2}}, 2);
    CHECK(dense.probs == std::vector<double>{0.25, 0.75});

    auto sparse = parse_distribution_frame(
        json{{"indices", {1, 3}}, {"probs", {0.5, 0.5}}, {"residual_uniform", false}, {"vocab_size", 4}}, 4);
    CHECK(sparse.probs == std::vector<double>{0.0, 0.5, 0.0, 0.5});

    CHECK_THROWS_AS(parse_distribution_frame(
                        json{{"indices", {0}}, {"probs", {0.5}}, {"residual_uniform", true}, {"vocab_size", 4}}, 4),
                    ProtocolError);
    CHECK_THROWS_AS(parse_distribution_frame(json{{"indices", {7}}, {"probs", {1.0}}, {"vocab_size", 4}}, 4),
                    ProtocolError);
    CHECK_THROWS_AS(parse_distribution_frame(json{{"probs", {0.5, 0.5}}, {"vocab_size", 3}}, 2), ProtocolError);
    CHECK_THROWS_AS(parse_distribution_frame(json{{"probs", {0.5, 0.6}}}, 2), ProtocolError);
    CHECK_THROWS_AS(parse_distribution_frame(json{{"error", {{"code", 400}, {"message", "bad"}}}}, 2),
                    ProtocolError);
    CHECK_NOTHROW(check_error_frame(json{{"probs", {1.0}}}));
}

TEST_CASE("http model: info, distributions, caching and text") {
    FakeServer server;
    auto model = http_model(server);
    CHECK(model.vocab_size() == 4);
    CHECK(model.info().model_name == "fake");
    REQUIRE(model.done_token().has_value());
    CHECK(*model.done_token() == 3);

    model.begin_session();
    std::vector<TokenId> prefix{0, 1};
    auto d = model.next_token_dist("dense", prefix);
    CHECK(d.probs == std::vector<double>{0.1, 0.2, 0.3, 0.4});
    model.next_token_dist("dense", prefix);
    CHECK(server.distribution_calls == 1);
    model.begin_session();
    model.next_token_dist("dense", prefix);
    CHECK(server.distribution_calls == 2);

    CHECK(model.next_token_dist("sparse", {}).probs == std::vector<double>{0.25, 0.0, 0.75, 0.0});

    CHECK(model.encode("cab") == std::vector<TokenId>{2, 0, 1});
    std::vector<TokenId> toks{1, 2};
    auto text = model.detokenize(toks);
    REQUIRE(text.has_value());
    CHECK(*text == "bc");
}

TEST_CASE("http model: protocol failures surface as errors") {
    FakeServer server;
    auto model = http_model(server);
    CHECK_THROWS_AS(model.next_token_dist("residual", {}), ProtocolError);
    CHECK_THROWS_AS(model.next_token_dist("unnormalized", {}), ProtocolError);
    CHECK_THROWS_AS(model.next_token_dist("status", {}), ProtocolError);
    std::vector<TokenId> bad{9};
    CHECK_THROWS_AS(model.next_token_dist("dense", bad), ProtocolError);
}

TEST_CASE("http model: unreachable server") {
    int port = 0;
    {
        // Grab a free port, then release it so nothing listens there.
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
    }
    auto make = [port] {
        return RemoteModel(std::make_unique<HttpTransport>("http://127.0.0.1:" + std::to_string(port), 1.0), "x");
    };
    CHECK_THROWS_AS(make(), ModelUnavailable);
}

TEST_CASE("http model through a config, used for a round trip") {
    FakeServer server;
    ModelConfig config;
    config.type = "remote";
    config.params = {{"url", server.url()}, {"model_name", "fake"}};
    config.max_len = 400;
    auto model = make_model(config);
    CHECK(model->vocab_size() == 4);
    CHECK(model->max_len() == std::optional<std::size_t>(400));
    model->begin_session();
    CHECK(model->next_token_dist("dense", {}).probs.size() == 4);
}

TEST_CASE("stdio model: subprocess speaks the JSON-lines protocol") {
    ModelConfig config;
    config.type = "subprocess";
    config.params = {{"command", fixture_command()}};
    auto model = make_model(config);
    CHECK(model->vocab_size() == 5);
    REQUIRE(model->done_token().has_value());
    CHECK(*model->done_token() == 4);

    model->begin_session();
    std::vector<TokenId> prefix{2};
    auto d = model->next_token_dist("", prefix);
    CHECK(d.probs == std::vector<double>{0.3, 0.3, 0.1, 0.1, 0.2});
    auto s = model->next_token_dist("sparse", prefix);
    CHECK(s.probs == d.probs);
    std::vector<TokenId> toks{0, 3, 4};
    CHECK(model->detokenize(toks) == std::optional<std::string>("ad"));

    std::vector<TokenId> bad{11};
    CHECK_THROWS_AS(model->next_token_dist("", bad), ProtocolError);
    // The session survives an error frame.
    CHECK(model->next_token_dist("", {}).probs.size() == 5);
}

TEST_CASE("stdio model: missing program") {
    ModelConfig config;
    config.type = "subprocess";
    config.params = {{"command", {"/nonexistent/model-server"}}};
    CHECK_THROWS_AS(make_model(config), ModelUnavailable);
}
