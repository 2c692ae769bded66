#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "flood/common.hpp"
#include "flood/multimodal.hpp"
#include "flood/protocol.hpp"
#include "flood/smote.hpp"
#include "flood/vision.hpp"

namespace flood {

enum class RunId { run1_multimodal, run2_text, run3_scene, run4_fused };

inline std::string to_string(RunId id) {
    switch (id) {
        case RunId::run1_multimodal: return "run1_multimodal";
        case RunId::run2_text: return "run2_text";
        case RunId::run3_scene: return "run3_scene";
        default: return "run4_fused";
    }
}

inline RunId run_id_from_string(const std::string& s) {
    if (s == "run1_multimodal") return RunId::run1_multimodal;
    if (s == "run2_text") return RunId::run2_text;
    if (s == "run3_scene") return RunId::run3_scene;
    if (s == "run4_fused") return RunId::run4_fused;
    throw ConfigError("key \"run_id\": unknown value \"" + s +
                      "\" (expected run1_multimodal|run2_text|run3_scene|run4_fused)");
}

struct RunConfig {
    RunId run_id = RunId::run2_text;
    std::filesystem::path train_path;
    std::filesystem::path dev_path;
    std::filesystem::path output_dir;
    uint64_t seed = 0;
    bool keep_mentions = false;

    TrainingProtocol protocol;

    bool smote_enabled = false;  // defaulted per run below
    SmoteConfig smote;
    RebalanceStrategy smote_strategy = RebalanceStrategy::automatic;

    std::string encoder_id = kDefaultEncoderId;
    ImageFeatureMode image_mode = ImageFeatureMode::dual_vgg_features;
    size_t n_image_tokens = 1;
    std::string object_backbone = "tiny";
    std::string scene_backbone = "tiny";
    std::string residual_backbone = "tiny";
};

namespace detail {

// Flat "key = value" lines with '#' comments. JSON files may nest one object
// level; nesting maps onto the dotted key names.
inline std::map<std::string, std::string> read_config_pairs(const std::filesystem::path& path) {
    std::map<std::string, std::string> pairs;
    if (path.extension() == ".json") {
        auto j = nlohmann::json::parse(read_file(path), nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw ConfigError("config is not a JSON object: " + path.string());
        }
        std::function<void(const std::string&, const nlohmann::json&)> walk =
            [&](const std::string& prefix, const nlohmann::json& node) {
                for (const auto& [key, value] : node.items()) {
                    std::string full = prefix.empty() ? key : prefix + "." + key;
                    if (value.is_object()) {
                        walk(full, value);
                    } else if (value.is_string()) {
                        pairs[full] = value.get<std::string>();
                    } else {
                        pairs[full] = value.dump();
                    }
                }
            };
        walk("", j);
        return pairs;
    }
    size_t line_no = 0;
    for (const auto& raw_line : split_string(read_file(path), '\n')) {
        ++line_no;
        std::string line = raw_line;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        }
        if (pairs.count(key)) {
            throw ConfigError("config key \"" + key + "\" appears twice");
        }
        pairs[key] = value;
    }
    return pairs;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("key \"" + key + "\": expected true|false, got \"" + value + "\"");
}

inline double parse_double(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key \"" + key + "\": expected a number, got \"" + value + "\"");
    }
}

inline long long parse_int(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key \"" + key + "\": expected an integer, got \"" + value + "\"");
    }
}

inline std::vector<int> seeds_from_count(long long n) {
    if (n < 1) throw ConfigError("key \"protocol.seeds\": seed count must be >= 1");
    std::vector<int> seeds;
    for (long long i = 1; i <= n; ++i) seeds.push_back(static_cast<int>(i));
    return seeds;
}

}  // namespace detail

inline const std::set<std::string>& known_config_keys() {
    static const std::set<std::string> keys = {
        "run_id", "data.train", "data.dev", "output_dir", "seed",
        "preprocess.keep_mentions",
        "protocol.learning_rate", "protocol.epochs", "protocol.seeds",
        "protocol.seed_list", "protocol.batch_size", "protocol.optimizer",
        "protocol.max_sequence_length",
        "smote.enabled", "smote.factor", "smote.k", "smote.seed", "smote.strategy",
        "encoder.id",
        "image.mode", "image.n_tokens",
        "vision.object_backbone", "vision.scene_backbone", "vision.residual_backbone",
    };
    return keys;
}

// Typed, defaulted, range-checked configuration; unknown keys are rejected.
inline RunConfig validate_config(const std::filesystem::path& path) {
    auto pairs = detail::read_config_pairs(path);
    for (const auto& [key, value] : pairs) {
        if (!known_config_keys().count(key)) {
            throw ConfigError("unknown config key \"" + key + "\"");
        }
    }
    auto get = [&](const char* key) -> const std::string* {
        auto it = pairs.find(key);
        return it == pairs.end() ? nullptr : &it->second;
    };
    auto require = [&](const char* key) -> const std::string& {
        auto* v = get(key);
        if (!v) {
            throw ConfigError("missing required config key \"" + std::string(key) + "\"");
        }
        return *v;
    };

    RunConfig cfg;
    cfg.run_id = run_id_from_string(require("run_id"));
    cfg.train_path = require("data.train");
    cfg.dev_path = require("data.dev");
    cfg.output_dir = require("output_dir");
    if (auto* v = get("seed")) cfg.seed = static_cast<uint64_t>(detail::parse_int("seed", *v));
    if (auto* v = get("preprocess.keep_mentions")) {
        cfg.keep_mentions = detail::parse_bool("preprocess.keep_mentions", *v);
    }

    // run4 trains only a head, which uses the faster default rate
    cfg.protocol.learning_rate = cfg.run_id == RunId::run4_fused ? 1e-4 : 1e-5;
    if (auto* v = get("protocol.learning_rate")) {
        cfg.protocol.learning_rate = detail::parse_double("protocol.learning_rate", *v);
        if (cfg.protocol.learning_rate <= 0.0) {
            throw ConfigError("key \"protocol.learning_rate\": must be > 0");
        }
    }
    if (auto* v = get("protocol.epochs")) {
        long long e = detail::parse_int("protocol.epochs", *v);
        if (e < 1) throw ConfigError("key \"protocol.epochs\": must be >= 1");
        cfg.protocol.epochs = static_cast<size_t>(e);
    }
    if (auto* v = get("protocol.seeds")) {
        cfg.protocol.seeds = detail::seeds_from_count(detail::parse_int("protocol.seeds", *v));
    }
    if (auto* v = get("protocol.seed_list")) {
        std::vector<int> seeds;
        for (const auto& cell : split_string(*v, ',')) {
            if (trim(cell).empty()) continue;
            seeds.push_back(static_cast<int>(detail::parse_int("protocol.seed_list", trim(cell))));
        }
        if (seeds.empty()) throw ConfigError("key \"protocol.seed_list\": empty seed list");
        cfg.protocol.seeds = seeds;
    }
    if (auto* v = get("protocol.batch_size")) {
        long long b = detail::parse_int("protocol.batch_size", *v);
        if (b < 1) throw ConfigError("key \"protocol.batch_size\": must be >= 1");
        cfg.protocol.batch_size = static_cast<size_t>(b);
    }
    if (auto* v = get("protocol.optimizer")) {
        if (*v != "adam") {
            throw ConfigError("key \"protocol.optimizer\": only \"adam\" is supported");
        }
    }
    if (auto* v = get("protocol.max_sequence_length")) {
        long long m = detail::parse_int("protocol.max_sequence_length", *v);
        if (m < 2) throw ConfigError("key \"protocol.max_sequence_length\": must be >= 2");
        cfg.protocol.max_sequence_length = static_cast<size_t>(m);
    }

    const bool image_run =
        cfg.run_id == RunId::run3_scene || cfg.run_id == RunId::run4_fused;
    cfg.smote_enabled = image_run;
    if (auto* v = get("smote.enabled")) {
        cfg.smote_enabled = detail::parse_bool("smote.enabled", *v);
        if (cfg.smote_enabled && !image_run) {
            throw ConfigError("key \"smote.enabled\": oversampling applies to runs 3/4 only");
        }
    }
    cfg.smote.rng_seed = cfg.seed;
    if (auto* v = get("smote.factor")) {
        long long f = detail::parse_int("smote.factor", *v);
        if (f < 1) throw ConfigError("key \"smote.factor\": must be >= 1");
        cfg.smote.inflation_factor = static_cast<size_t>(f);
    }
    if (auto* v = get("smote.k")) {
        long long k = detail::parse_int("smote.k", *v);
        if (k < 1) throw ConfigError("key \"smote.k\": must be >= 1");
        cfg.smote.k_neighbors = static_cast<size_t>(k);
    }
    if (auto* v = get("smote.seed")) {
        cfg.smote.rng_seed = static_cast<uint64_t>(detail::parse_int("smote.seed", *v));
    }
    if (auto* v = get("smote.strategy")) {
        if (*v == "auto") cfg.smote_strategy = RebalanceStrategy::automatic;
        else if (*v == "smote_features") cfg.smote_strategy = RebalanceStrategy::smote_features;
        else if (*v == "resample_duplicates") {
            cfg.smote_strategy = RebalanceStrategy::resample_duplicates;
        } else {
            throw ConfigError(
                "key \"smote.strategy\": expected auto|smote_features|resample_duplicates");
        }
    }

    if (auto* v = get("encoder.id")) cfg.encoder_id = *v;
    if (auto* v = get("image.mode")) cfg.image_mode = image_feature_mode_from_string(*v);
    if (auto* v = get("image.n_tokens")) {
        long long n = detail::parse_int("image.n_tokens", *v);
        if (n < 1) throw ConfigError("key \"image.n_tokens\": must be >= 1");
        cfg.n_image_tokens = static_cast<size_t>(n);
    }
    if (auto* v = get("vision.object_backbone")) cfg.object_backbone = *v;
    if (auto* v = get("vision.scene_backbone")) cfg.scene_backbone = *v;
    if (auto* v = get("vision.residual_backbone")) cfg.residual_backbone = *v;

    for (const char* key : {"data.train", "data.dev"}) {
        const std::filesystem::path p = pairs.at(key);
        if (!std::filesystem::exists(p)) {
            throw ConfigError("key \"" + std::string(key) + "\": path does not exist: " +
                              p.string());
        }
    }
    cfg.protocol.validate();
    return cfg;
}

// Every effective value, defaults included, as diff-able flat text.
inline std::string freeze_config(const RunConfig& cfg) {
    std::map<std::string, std::string> out;
    out["run_id"] = to_string(cfg.run_id);
    out["data.train"] = cfg.train_path.string();
    out["data.dev"] = cfg.dev_path.string();
    out["output_dir"] = cfg.output_dir.string();
    out["seed"] = std::to_string(cfg.seed);
    out["preprocess.keep_mentions"] = cfg.keep_mentions ? "true" : "false";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", cfg.protocol.learning_rate);
    out["protocol.learning_rate"] = buf;
    out["protocol.epochs"] = std::to_string(cfg.protocol.epochs);
    {
        std::string list;
        for (int s : cfg.protocol.seeds) list += (list.empty() ? "" : ",") + std::to_string(s);
        out["protocol.seed_list"] = list;
    }
    out["protocol.batch_size"] = std::to_string(cfg.protocol.batch_size);
    out["protocol.optimizer"] = "adam";
    out["protocol.max_sequence_length"] = std::to_string(cfg.protocol.max_sequence_length);
    out["smote.enabled"] = cfg.smote_enabled ? "true" : "false";
    out["smote.factor"] = std::to_string(cfg.smote.inflation_factor);
    out["smote.k"] = std::to_string(cfg.smote.k_neighbors);
    out["smote.seed"] = std::to_string(cfg.smote.rng_seed);
    out["smote.strategy"] = cfg.smote_strategy == RebalanceStrategy::automatic
                                ? "auto"
                                : (cfg.smote_strategy == RebalanceStrategy::smote_features
                                       ? "smote_features"
                                       : "resample_duplicates");
    out["encoder.id"] = cfg.encoder_id;
    out["image.mode"] = to_string(cfg.image_mode);
    out["image.n_tokens"] = std::to_string(cfg.n_image_tokens);
    out["vision.object_backbone"] = cfg.object_backbone;
    out["vision.scene_backbone"] = cfg.scene_backbone;
    out["vision.residual_backbone"] = cfg.residual_backbone;

    std::string text;
    for (const auto& [key, value] : out) text += key + " = " + value + "\n";
    return text;
}

}  // namespace flood
