#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "flood/common.hpp"
#include "flood/nn/serialize.hpp"
#include "flood/nn/transformer.hpp"
#include "flood/tokenizer.hpp"

namespace flood {

// A pretrained encoder plus its model-specific tokenizer, loaded as one
// bundle so the two can never drift apart.
struct EncoderHandle {
    std::string identifier;
    Tokenizer tokenizer;
    nn::TransformerConfig config;
    nn::TransformerEncoder encoder;

    size_t hidden_dim() const { return config.hidden; }
};

inline constexpr const char* kDefaultEncoderId = "dbmdz/bert-base-italian-uncased";

// Bundle directory: config.json + vocab.txt + weights.bin.
inline void save_encoder_bundle(const EncoderHandle& handle, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json j;
    j["identifier"] = handle.identifier;
    j["vocab_size"] = handle.config.vocab_size;
    j["hidden"] = handle.config.hidden;
    j["n_layers"] = handle.config.n_layers;
    j["n_heads"] = handle.config.n_heads;
    j["ffn_dim"] = handle.config.ffn();
    j["max_positions"] = handle.config.max_positions;
    j["n_segments"] = handle.config.n_segments;
    j["dropout"] = handle.config.dropout;
    write_file_atomic(dir / "config.json", j.dump(2) + "\n");
    write_file_atomic(dir / "vocab.txt", handle.tokenizer.to_vocab_file());
    nn::save_params(handle.encoder.params(), dir / "weights.bin");
}

inline EncoderHandle load_encoder_bundle(const std::filesystem::path& dir) {
    if (!std::filesystem::exists(dir / "config.json")) {
        throw ConfigError("encoder bundle missing config.json: " + dir.string());
    }
    auto j = nlohmann::json::parse(read_file(dir / "config.json"));
    EncoderHandle handle;
    handle.identifier = j.value("identifier", dir.string());
    handle.tokenizer = Tokenizer::from_vocab_file(read_file(dir / "vocab.txt"));
    nn::TransformerConfig cfg;
    cfg.vocab_size = j.at("vocab_size").get<size_t>();
    cfg.hidden = j.at("hidden").get<size_t>();
    cfg.n_layers = j.at("n_layers").get<size_t>();
    cfg.n_heads = j.at("n_heads").get<size_t>();
    cfg.ffn_dim = j.value("ffn_dim", size_t{0});
    cfg.max_positions = j.at("max_positions").get<size_t>();
    cfg.n_segments = j.value("n_segments", size_t{2});
    cfg.dropout = j.value("dropout", 0.1);
    if (cfg.vocab_size != handle.tokenizer.vocab_size()) {
        throw ConfigError("encoder bundle: vocab.txt size " +
                          std::to_string(handle.tokenizer.vocab_size()) +
                          " does not match config vocab_size " +
                          std::to_string(cfg.vocab_size));
    }
    handle.config = cfg;
    Rng init_rng(0);
    handle.encoder = nn::TransformerEncoder(cfg, init_rng);
    nn::load_params(handle.encoder.params(), dir / "weights.bin");
    return handle;
}

struct TinyEncoderSpec {
    size_t hidden = 32;
    size_t n_layers = 2;
    size_t n_heads = 2;
    size_t max_positions = 64;
    uint64_t seed = 7;
};

// Parses "tiny" or "tiny:hidden=32,layers=2,heads=2,positions=64,seed=7".
inline TinyEncoderSpec parse_tiny_encoder_spec(const std::string& id) {
    TinyEncoderSpec spec;
    auto colon = id.find(':');
    if (colon == std::string::npos) return spec;
    for (const auto& kv : split_string(id.substr(colon + 1), ',')) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("bad tiny encoder option: " + kv);
        std::string key = trim(kv.substr(0, eq));
        std::string value = trim(kv.substr(eq + 1));
        if (key == "hidden") spec.hidden = std::stoul(value);
        else if (key == "layers") spec.n_layers = std::stoul(value);
        else if (key == "heads") spec.n_heads = std::stoul(value);
        else if (key == "positions") spec.max_positions = std::stoul(value);
        else if (key == "seed") spec.seed = std::stoull(value);
        else throw ConfigError("unknown tiny encoder option \"" + key + "\"");
    }
    return spec;
}

// Random-weight encoder whose vocabulary comes from the training corpus.
// Desk-scale stand-in for a real pretrained bundle; same interface.
inline EncoderHandle build_tiny_encoder(const TinyEncoderSpec& spec,
                                        const std::vector<std::string>& corpus_texts,
                                        const std::string& identifier = "tiny") {
    EncoderHandle handle;
    handle.identifier = identifier;
    handle.tokenizer = Tokenizer::build_from_texts(corpus_texts);
    nn::TransformerConfig cfg;
    cfg.vocab_size = handle.tokenizer.vocab_size();
    cfg.hidden = spec.hidden;
    cfg.n_layers = spec.n_layers;
    cfg.n_heads = spec.n_heads;
    cfg.max_positions = spec.max_positions;
    handle.config = cfg;
    Rng rng(spec.seed);
    handle.encoder = nn::TransformerEncoder(cfg, rng);
    return handle;
}

// Encoder identity resolution: a directory path loads that bundle; the
// "tiny[:opts]" form builds a random-weight encoder from corpus texts; any
// other identifier (including the default, which names a published model)
// requires the weights to be present locally as a bundle.
inline EncoderHandle resolve_encoder(const std::string& id,
                                     const std::vector<std::string>& corpus_texts) {
    if (id == "tiny" || starts_with(id, "tiny:")) {
        return build_tiny_encoder(parse_tiny_encoder_spec(id), corpus_texts, id);
    }
    if (std::filesystem::is_directory(id)) {
        return load_encoder_bundle(id);
    }
    throw ConfigError(
        "encoder \"" + id + "\" is not available locally. Pass a bundle directory "
        "(config.json + vocab.txt + weights.bin) or use \"tiny\" for a random-weight "
        "desk-scale encoder.");
}

}  // namespace flood
