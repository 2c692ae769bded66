#pragma once

#include <cstdio>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "flood/common.hpp"
#include "flood/nn/serialize.hpp"
#include "flood/protocol.hpp"

namespace flood {

// Checkpoint directory layout: config.json + weights.bin + devscore.txt.
// Files are written atomically so a crashed run never leaves a half-valid
// checkpoint behind.
struct Checkpoint {
    std::filesystem::path dir;
    nlohmann::json config;
    double dev_score = 0.0;
    int seed = 0;
};

inline void save_checkpoint(const std::filesystem::path& dir, const nlohmann::json& config,
                            const nn::NamedParams& params, double dev_score) {
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / "config.json", config.dump(2) + "\n");
    nn::save_params(params, dir / "weights.bin");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f\n", dev_score);
    write_file_atomic(dir / "devscore.txt", buf);
}

inline Checkpoint open_checkpoint(const std::filesystem::path& dir) {
    Checkpoint ckpt;
    ckpt.dir = dir;
    if (!std::filesystem::exists(dir / "config.json")) {
        throw IoError("not a checkpoint directory (config.json missing): " + dir.string());
    }
    ckpt.config = nlohmann::json::parse(read_file(dir / "config.json"));
    ckpt.dev_score = std::stod(trim(read_file(dir / "devscore.txt")));
    ckpt.seed = ckpt.config.value("seed", 0);
    return ckpt;
}

// The persisted label mapping; prediction code reads it back rather than
// assuming the compiled-in order.
inline nlohmann::json label_mapping_json() {
    nlohmann::json j;
    j["0"] = "not_relevant";
    j["1"] = "relevant";
    return j;
}

}  // namespace flood
