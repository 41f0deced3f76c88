// Python bindings: the CLI's operations as plain functions. JSON-shaped
// values (model configs, transcripts) cross the boundary as dicts.

#include "steg/dynamic_ecc.hpp"
#include "steg/entropy_analysis.hpp"
#include "steg/error.hpp"
#include "steg/keyed_randomness.hpp"
#include "steg/models.hpp"
#include "steg/steganography.hpp"
#include "steg/watermark.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace steg;

namespace {

nlohmann::json to_cpp(const py::object& o) {
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

std::unique_ptr<RandomSource> make_rng(std::optional<std::uint64_t> seed) {
    if (seed) return std::make_unique<SeededRandom>(*seed);
    return std::make_unique<SystemRandom>();
}

StegConfig make_config(int lambda_bits, double threshold, std::optional<std::size_t> scored_bits) {
    StegConfig c;
    c.lambda_bits = lambda_bits;
    c.threshold_t = threshold;
    c.scored_bits_per_token = scored_bits;
    return c;
}

Bits response_bits(const std::optional<std::string>& bits, const std::optional<std::vector<TokenId>>& tokens,
                   std::size_t token_width) {
    if (bits && tokens) throw ConfigError("give bits or tokens, not both");
    if (bits) return bits_from_string(*bits);
    if (tokens) return tokens_to_bits(*tokens, token_width);
    throw ConfigError("bits or tokens is required");
}

std::string keygen(int lambda_bits, std::optional<std::uint64_t> seed) {
    auto rng = make_rng(seed);
    return setup(lambda_bits, *rng).to_hex();
}

py::object embed(const std::string& key, const py::object& model, const py::bytes& payload, const std::string& prompt,
                 int lambda_bits, double threshold, const std::string& scheme, std::optional<std::size_t> scored_bits,
                 std::optional<std::uint64_t> seed) {
    const std::string raw = payload;
    if (raw.empty()) throw ConfigError("payload is empty");
    Bits framed = frame_payload(std::vector<std::uint8_t>(raw.begin(), raw.end()));
    auto m = make_model(ModelConfig::from_json(to_cpp(model)));
    HmacPrf prf(SecretKey::from_hex(key));
    StegConfig config = make_config(lambda_bits, threshold, scored_bits);
    Transcript t;
    if (scheme == "one-query") {
        t = steg_generate_one(prf, *m, prompt, framed, config);
    } else if (scheme == "full") {
        auto rng = make_rng(seed);
        t = steg_generate(prf, *m, prompt, framed, config, *rng);
    } else {
        throw ConfigError("scheme must be 'full' or 'one-query'");
    }
    return to_py(to_json(t));
}

py::dict extract(const std::string& key, const std::optional<std::string>& bits,
                 const std::optional<std::vector<TokenId>>& tokens, std::size_t token_width, int lambda_bits,
                 double threshold, const std::string& scheme, std::optional<std::size_t> scored_bits) {
    Bits in = response_bits(bits, tokens, token_width);
    HmacPrf prf(SecretKey::from_hex(key));
    StegConfig config = make_config(lambda_bits, threshold, scored_bits);
    std::optional<Retrieval> r;
    if (scheme == "one-query") {
        r = steg_retrieve_one(prf, in, config, token_width);
    } else if (scheme == "full") {
        r = steg_retrieve(prf, in, config, token_width);
    } else {
        throw ConfigError("scheme must be 'full' or 'one-query'");
    }
    Unframed u = r ? unframe(r->payload) : Unframed{};
    py::dict out;
    const char* status[] = {"none", "partial", "full"};
    out["status"] = status[static_cast<int>(u.status)];
    auto bytes = u.bytes();
    out["payload"] = py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    out["payload_bits"] = bits_to_string(u.payload_bits);
    out["declared_bits"] = u.declared_bits;
    return out;
}

py::object watermark(const std::string& key, const py::object& model, const std::string& prompt, int lambda_bits,
                     std::optional<std::uint64_t> seed) {
    auto m = make_model(ModelConfig::from_json(to_cpp(model)));
    auto rng = make_rng(seed);
    return to_py(to_json(wat_generate(SecretKey::from_hex(key), *m, prompt, lambda_bits, *rng)));
}

std::optional<std::size_t> detect(const std::string& key, const std::optional<std::string>& bits,
                                  const std::optional<std::vector<TokenId>>& tokens, std::size_t token_width,
                                  int lambda_bits) {
    auto v = wat_detect(SecretKey::from_hex(key), response_bits(bits, tokens, token_width), lambda_bits);
    return v.detected ? v.split_index : std::nullopt;
}

py::list simulate_capacity(const py::object& model, const std::vector<std::size_t>& lengths, std::size_t trials,
                           int lambda_bits, double threshold, const std::string& scheme,
                           std::optional<std::uint64_t> seed, std::size_t workers) {
    CapacityOptions opt;
    opt.lengths = lengths;
    opt.trials_per_length = trials;
    opt.config = make_config(lambda_bits, threshold, std::nullopt);
    opt.scheme = scheme == "full" ? Scheme::Full : Scheme::OneQuery;
    opt.seed = seed;
    opt.workers = workers;
    ModelFactory factory = factory_from_config(ModelConfig::from_json(to_cpp(model)));
    CapacityResult res = [&] {
        py::gil_scoped_release release;
        return capacity_sweep(factory, opt);
    }();
    py::list out;
    for (const auto& p : res.points) {
        py::dict d;
        d["response_len_tokens"] = p.response_len_tokens;
        d["mean_recovered_bits"] = p.mean_recovered_bits;
        d["trials"] = p.trials;
        d["stderr_bits"] = p.stderr_bits;
        d["error"] = p.error ? py::object(py::str(*p.error)) : py::object(py::none());
        out.append(d);
    }
    return out;
}

} // namespace

PYBIND11_MODULE(pysteg, m) {
    m.doc() = "Keyed LLM steganography and watermarking";

    auto base = py::register_exception<Error>(m, "StegError", PyExc_ValueError);
    py::register_exception<ModelUnavailable>(m, "ModelUnavailable", base.ptr());

    m.def("keygen", &keygen, py::arg("lambda_bits") = 128, py::arg("seed") = py::none(),
          "New secret key as hex. A seed makes it deterministic (testing only).");
    m.def("embed", &embed, py::arg("key"), py::arg("model"), py::arg("payload"), py::arg("prompt") = "",
          py::arg("lambda_bits") = 16, py::arg("threshold") = 2.0, py::arg("scheme") = "full",
          py::arg("scored_bits") = py::none(), py::arg("seed") = py::none(),
          "Generate a response carrying `payload`; returns the transcript as a dict.");
    m.def("extract", &extract, py::arg("key"), py::arg("bits") = py::none(), py::arg("tokens") = py::none(),
          py::arg("token_width") = 1, py::arg("lambda_bits") = 16, py::arg("threshold") = 2.0,
          py::arg("scheme") = "full", py::arg("scored_bits") = py::none(),
          "Recover a payload; status is 'full', 'partial' or 'none'.");
    m.def("watermark", &watermark, py::arg("key"), py::arg("model"), py::arg("prompt") = "",
          py::arg("lambda_bits") = 16, py::arg("seed") = py::none());
    m.def("detect", &detect, py::arg("key"), py::arg("bits") = py::none(), py::arg("tokens") = py::none(),
          py::arg("token_width") = 1, py::arg("lambda_bits") = 16,
          "Split index at which the watermark was found, or None.");
    m.def("simulate_capacity", &simulate_capacity, py::arg("model"), py::arg("lengths"), py::arg("trials") = 100,
          py::arg("lambda_bits") = 16, py::arg("threshold") = 2.0, py::arg("scheme") = "one-query",
          py::arg("seed") = py::none(), py::arg("workers") = 1);
    m.def(
        "decode", [](const std::string& symbols) { return bits_to_string(decode(symbols_from_string(symbols))); },
        py::arg("symbols"), "Decode a string over 0, 1 and '<' (backspace).");
    m.def("required_length", &required_length, py::arg("k"), py::arg("epsilon"));
    m.def("prf_unit", [](const std::string& key, const std::string& prefix, std::uint64_t index, int symbol) {
        if (symbol < 0 || symbol > 3) throw ConfigError("symbol must be 0, 1, 2 (backspace) or 3 (none)");
        return prf_unit(SecretKey::from_hex(key), {bits_from_string(prefix), index, static_cast<PrfSymbol>(symbol)})
            .value();
    }, py::arg("key"), py::arg("prefix"), py::arg("index"), py::arg("symbol") = 3);
}
