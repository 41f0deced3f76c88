#include "cli.hpp"

#include "steg/entropy_analysis.hpp"
#include "steg/error.hpp"
#include "steg/keyed_randomness.hpp"
#include "steg/models.hpp"
#include "steg/remote_model.hpp"
#include "steg/steganography.hpp"
#include "steg/watermark.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

namespace steg::cli {
namespace {

using nlohmann::json;

struct Options {
    std::string key_path;
    std::string model_path;
    std::string config_path;
    std::string payload_hex;
    std::string payload_file;
    std::string prompt;
    std::string in_path;
    std::string text;
    std::string out_path;
    std::string format = "transcript-json";
    std::optional<std::string> scheme; // full unless the command says otherwise
    std::string lengths = "20,40,60,80,100";
    std::string gnuplot_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> lambda;
    std::optional<double> threshold;
    int key_lambda = 128;
    std::size_t trials = 100;
    std::size_t workers = 1;
    bool force = false;
    bool debug = false;
};

/// Invalid user input (maps to exit code 3).
struct InvalidInput : Error {
    using Error::Error;
};

std::unique_ptr<RandomSource> make_rng(const Options& o) {
    if (o.seed) return std::make_unique<SeededRandom>(*o.seed);
    return std::make_unique<SystemRandom>();
}

StegConfig steg_config(const Options& o) {
    StegConfig c = o.config_path.empty() ? StegConfig{} : StegConfig::load(o.config_path);
    if (o.lambda) c.lambda_bits = *o.lambda;
    if (o.threshold) c.threshold_t = *o.threshold;
    return c;
}

std::unique_ptr<Model> load_model(const Options& o) {
    if (o.model_path.empty()) throw ConfigError("--model is required");
    return make_model(ModelConfig::load(o.model_path));
}

SecretKey load_key_flag(const Options& o) {
    if (o.key_path.empty()) throw ConfigError("--key is required");
    return load_key(o.key_path);
}

void emit(const Options& o, std::ostream& out, const std::string& text) {
    if (o.out_path.empty()) {
        out << text;
        return;
    }
    std::ofstream f(o.out_path, std::ios::trunc);
    if (!f) throw ConfigError("cannot write " + o.out_path);
    f << text;
}

std::string render(const Options& o, const Transcript& t, Model& model) {
    if (o.format == "transcript-json") return to_json(t, o.debug).dump(2) + "\n";
    if (o.format == "tokens-json") return json{{"tokens", t.tokens}, {"token_width", t.token_width}}.dump() + "\n";
    if (auto text = model.detokenize(t.tokens)) return *text + "\n";
    std::ostringstream s;
    for (std::size_t i = 0; i < t.tokens.size(); ++i) s << (i ? " " : "") << t.tokens[i];
    return s.str() + "\n";
}

std::vector<std::uint8_t> read_payload(const Options& o) {
    if (!o.payload_hex.empty() && !o.payload_file.empty()) {
        throw ConfigError("give only one of --payload-hex and --payload-file");
    }
    std::vector<std::uint8_t> bytes;
    if (!o.payload_file.empty()) {
        std::ifstream f(o.payload_file, std::ios::binary);
        if (!f) throw ConfigError("cannot read payload file " + o.payload_file);
        bytes.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    } else {
        try {
            bytes = from_hex(o.payload_hex);
        } catch (const EncodingError& e) {
            throw InvalidInput(std::string("payload: ") + e.what());
        }
    }
    if (bytes.empty()) throw InvalidInput("payload is empty");
    return bytes;
}

struct BitInput {
    Bits bits;
    std::size_t width = 1;
};

/// Response bits from --in (token JSON or transcript JSON) or --text.
BitInput read_bits(const Options& o) {
    if (!o.text.empty()) {
        auto model = load_model(o);
        auto* remote = dynamic_cast<RemoteModel*>(model.get());
        if (!remote) throw ConfigError("--text needs a remote or subprocess model to tokenize");
        BitInput in;
        in.width = token_width(remote->vocab_size());
        in.bits = tokens_to_bits(remote->encode(o.text), in.width);
        return in;
    }
    if (o.in_path.empty()) throw ConfigError("--in or --text is required");
    std::ifstream f(o.in_path);
    if (!f) throw ConfigError("cannot read " + o.in_path);
    json j;
    try {
        j = json::parse(f);
    } catch (const json::parse_error& e) {
        throw InvalidInput(std::string("input is not JSON: ") + e.what());
    }
    if (!j.is_object()) throw InvalidInput("input must be a JSON object");
    BitInput in;
    try {
        if (j.contains("bits")) {
            in.bits = bits_from_string(j.at("bits").get<std::string>());
            in.width = j.value("token_width", std::size_t{1});
            return in;
        }
        auto tokens = j.at("tokens").get<std::vector<TokenId>>();
        if (j.contains("token_width")) {
            in.width = j.at("token_width").get<std::size_t>();
        } else if (!o.model_path.empty()) {
            in.width = token_width(load_model(o)->vocab_size());
        } else {
            throw ConfigError("token input needs token_width or --model");
        }
        in.bits = tokens_to_bits(tokens, in.width);
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("input needs \"bits\" or \"tokens\": ") + e.what());
    } catch (const EncodingError& e) {
        throw InvalidInput(e.what());
    }
    if (in.width == 0) throw InvalidInput("token_width must be positive");
    return in;
}

std::vector<std::size_t> parse_lengths(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream s(text);
    std::string cell;
    while (std::getline(s, cell, ',')) {
        try {
            std::size_t used = 0;
            unsigned long long v = std::stoull(cell, &used);
            if (used != cell.size() || v == 0) throw std::invalid_argument(cell);
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::logic_error&) {
            throw ConfigError("invalid length '" + cell + "' in --lengths");
        }
    }
    if (out.empty()) throw ConfigError("--lengths is empty");
    return out;
}

// ---------------------------------------------------------------------------

int cmd_keygen(const Options& o, std::ostream& out) {
    auto rng = make_rng(o);
    SecretKey key = setup(o.key_lambda, *rng);
    if (o.out_path.empty()) {
        out << key.to_hex() << '\n';
    } else {
        save_key(o.out_path, key, o.force);
    }
    return kOk;
}

int cmd_embed(const Options& o, std::ostream& out, std::ostream& err) {
    SecretKey key = load_key_flag(o);
    auto payload = read_payload(o);
    Bits framed = frame_payload(payload);
    auto model = load_model(o);
    StegConfig config = steg_config(o);
    HmacPrf prf(key);
    Transcript t;
    if (o.scheme.value_or("full") == "one-query") {
        t = steg_generate_one(prf, *model, o.prompt, framed, config);
    } else {
        auto rng = make_rng(o);
        t = steg_generate(prf, *model, o.prompt, framed, config, *rng);
    }
    if (t.low_entropy) err << "warning: low entropy: payload not embedded\n";
    emit(o, out, render(o, t, *model));
    return kOk;
}

int cmd_extract(const Options& o, std::ostream& out) {
    SecretKey key = load_key_flag(o);
    BitInput in = read_bits(o);
    StegConfig config = steg_config(o);
    HmacPrf prf(key);
    std::optional<Retrieval> r;
    if (o.scheme.value_or("full") == "one-query") {
        r = steg_retrieve_one(prf, in.bits, config, in.width);
    } else {
        r = steg_retrieve(prf, in.bits, config, in.width);
    }
    Unframed u = r ? unframe(r->payload) : Unframed{};
    switch (u.status) {
    case Unframed::Status::Full: out << to_hex(u.bytes()) << '\n'; return kOk;
    case Unframed::Status::Partial:
        out << "partial " << to_hex(u.bytes()) << ' ' << u.payload_bits.size() << '/' << u.declared_bits
            << " bits\n";
        return kOk;
    case Unframed::Status::None: break;
    }
    out << "none\n";
    return kNotFound;
}

int cmd_detect(const Options& o, std::ostream& out) {
    SecretKey key = load_key_flag(o);
    BitInput in = read_bits(o);
    WatermarkVerdict v = wat_detect(key, in.bits, o.lambda.value_or(steg_config(o).lambda_bits));
    if (v.detected) {
        out << "WATERMARKED at split " << *v.split_index << '\n';
        return kOk;
    }
    out << "clean\n";
    return kNotFound;
}

int cmd_watermark(const Options& o, std::ostream& out, std::ostream& err) {
    SecretKey key = load_key_flag(o);
    auto model = load_model(o);
    auto rng = make_rng(o);
    Transcript t = wat_generate(key, *model, o.prompt, o.lambda.value_or(steg_config(o).lambda_bits), *rng);
    if (t.low_entropy) err << "warning: low entropy: response not watermarked\n";
    emit(o, out, render(o, t, *model));
    return kOk;
}

int cmd_analyze(const Options& o, std::ostream& out) {
    if (o.in_path.empty()) throw ConfigError("--in is required");
    std::ifstream f(o.in_path);
    if (!f) throw ConfigError("cannot read " + o.in_path);
    Transcript t;
    try {
        t = transcript_from_json(json::parse(f));
    } catch (const json::parse_error& e) {
        throw InvalidInput(std::string("transcript is not JSON: ") + e.what());
    }
    if (t.per_bit.size() != t.bits.size()) throw InvalidInput("transcript lacks per-bit entropy records");
    emit(o, out, to_json(entropy_profile(t)).dump(2) + "\n");
    return kOk;
}

int cmd_capacity(const Options& o, std::ostream& out, std::ostream& err) {
    if (o.model_path.empty()) throw ConfigError("--model is required");
    ModelConfig mc = ModelConfig::load(o.model_path);
    CapacityOptions opt;
    opt.lengths = parse_lengths(o.lengths);
    opt.trials_per_length = o.trials;
    opt.config = steg_config(o);
    opt.scheme = o.scheme.value_or("one-query") == "full" ? Scheme::Full : Scheme::OneQuery;
    opt.prompt = o.prompt;
    opt.seed = o.seed;
    opt.workers = o.workers;
    CapacityResult res = capacity_sweep(factory_from_config(mc), opt);
    std::ostringstream csv;
    write_capacity_csv(csv, res.points);
    emit(o, out, csv.str());
    for (const auto& p : res.points) {
        if (p.error) err << "length " << p.response_len_tokens << ": " << *p.error << '\n';
    }
    if (!o.gnuplot_path.empty()) {
        std::ofstream g(o.gnuplot_path, std::ios::trunc);
        if (!g) throw ConfigError("cannot write " + o.gnuplot_path);
        g << gnuplot_script(o.out_path.empty() ? "capacity.csv" : o.out_path);
    }
    return kOk;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Hide payloads in sampled model output and recover them with a secret key", "stegtool"};
    app.require_subcommand(1);

    auto add_key = [&](CLI::App* c) { c->add_option("--key", o.key_path, "Hex key file"); };
    auto add_model = [&](CLI::App* c) { c->add_option("--model", o.model_path, "Model config JSON"); };
    auto add_steg = [&](CLI::App* c) {
        c->add_option("--config", o.config_path, "Steg config JSON");
        c->add_option("--lambda", o.lambda, "Security parameter lambda in bits");
        c->add_option("--threshold", o.threshold, "Chunk score threshold t");
        c->add_option("--scheme", o.scheme, "full or one-query")->check(CLI::IsMember({"full", "one-query"}));
    };
    auto add_output = [&](CLI::App* c) {
        c->add_option("--out", o.out_path, "Output file (default stdout)");
        c->add_option("--format", o.format, "tokens-json, text or transcript-json")
            ->check(CLI::IsMember({"tokens-json", "text", "transcript-json"}));
        c->add_flag("--debug", o.debug, "Include keyed draws in transcripts");
    };
    auto add_input = [&](CLI::App* c) {
        c->add_option("--in", o.in_path, "Token JSON {\"tokens\": [...]} or transcript JSON");
        c->add_option("--text", o.text, "Response text, tokenized by the model server");
    };

    auto* keygen = app.add_subcommand("keygen", "Generate a secret key");
    keygen->add_option("--lambda", o.key_lambda, "Key length in bits")->check(CLI::IsMember({64, 128, 256}));
    keygen->add_option("--out", o.out_path, "Key file (default stdout)");
    keygen->add_flag("--force", o.force, "Overwrite an existing key file");
    keygen->add_option("--seed", o.seed, "Deterministic key (testing only)");

    auto* embed = app.add_subcommand("embed", "Generate a response carrying a payload");
    add_key(embed);
    add_model(embed);
    add_steg(embed);
    add_output(embed);
    embed->add_option("--prompt", o.prompt, "Prompt text");
    embed->add_option("--payload-hex", o.payload_hex, "Payload as hex");
    embed->add_option("--payload-file", o.payload_file, "Payload as raw bytes");
    embed->add_option("--seed", o.seed, "Seed for the entropy phase randomness");

    auto* extract = app.add_subcommand("extract", "Recover a payload from a response");
    add_key(extract);
    add_model(extract);
    add_steg(extract);
    add_input(extract);

    auto* detect = app.add_subcommand("detect", "Detect the plain watermark");
    add_key(detect);
    add_model(detect);
    add_input(detect);
    detect->add_option("--config", o.config_path, "Steg config JSON (for lambda)");
    detect->add_option("--lambda", o.lambda, "Security parameter lambda in bits");

    auto* watermark = app.add_subcommand("watermark", "Generate a watermarked response");
    add_key(watermark);
    add_model(watermark);
    add_output(watermark);
    watermark->add_option("--prompt", o.prompt, "Prompt text");
    watermark->add_option("--lambda", o.lambda, "Security parameter lambda in bits");
    watermark->add_option("--seed", o.seed, "Seed for the entropy phase randomness");

    auto* analyze = app.add_subcommand("analyze", "Entropy profile of a transcript");
    analyze->add_option("--in", o.in_path, "Transcript JSON")->required();
    analyze->add_option("--out", o.out_path, "Output file (default stdout)");

    auto* capacity = app.add_subcommand("simulate-capacity", "Recovered payload bits by response length");
    add_model(capacity);
    capacity->add_option("--config", o.config_path, "Steg config JSON");
    capacity->add_option("--lambda", o.lambda, "Security parameter lambda in bits");
    capacity->add_option("--threshold", o.threshold, "Chunk score threshold t");
    capacity->add_option("--scheme", o.scheme, "one-query (default) or full")->check(CLI::IsMember({"full", "one-query"}));
    capacity->add_option("--lengths", o.lengths, "Comma separated response lengths in tokens");
    capacity->add_option("--trials", o.trials, "Trials per length")->check(CLI::PositiveNumber);
    capacity->add_option("--workers", o.workers, "Concurrent trials")->check(CLI::PositiveNumber);
    capacity->add_option("--seed", o.seed, "Seed for keys, payloads and sampling");
    capacity->add_option("--prompt", o.prompt, "Prompt text");
    capacity->add_option("--out", o.out_path, "CSV output (default stdout)");
    capacity->add_option("--gnuplot", o.gnuplot_path, "Also write a gnuplot script");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e, out, err);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*keygen) return cmd_keygen(o, out);
        if (*embed) return cmd_embed(o, out, err);
        if (*extract) return cmd_extract(o, out);
        if (*detect) return cmd_detect(o, out);
        if (*watermark) return cmd_watermark(o, out, err);
        if (*analyze) return cmd_analyze(o, out);
        if (*capacity) return cmd_capacity(o, out, err);
    } catch (const InvalidInput& e) {
        err << "error: " << e.what() << '\n';
        return kInvalidInput;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const ModelUnavailable& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kInvalidInput;
    }
    return kUsage;
}

} // namespace steg::cli
