#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "flood/common.hpp"
#include "flood/nn/layers.hpp"
#include "flood/nn/tensor.hpp"

namespace flood::nn {

// Named-tensor blob: magic, count, then (name, rank, dims, float64 data) per
// tensor. Doubles on purpose: reloading a checkpoint must reproduce scores
// bit-for-bit.
namespace detail {
constexpr char kWeightsMagic[4] = {'F', 'L', 'W', 'T'};
constexpr uint32_t kWeightsVersion = 1;
}  // namespace detail

inline std::string serialize_params(const NamedParams& params) {
    std::string out;
    auto put_u32 = [&](uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); };
    auto put_u64 = [&](uint64_t v) { out.append(reinterpret_cast<const char*>(&v), 8); };
    out.append(detail::kWeightsMagic, 4);
    put_u32(detail::kWeightsVersion);
    put_u64(params.size());
    for (const auto& [name, t] : params) {
        put_u32(static_cast<uint32_t>(name.size()));
        out += name;
        put_u32(static_cast<uint32_t>(t->shape.size()));
        for (size_t d : t->shape) put_u64(d);
        out.append(reinterpret_cast<const char*>(t->v.data()), t->v.size() * sizeof(double));
    }
    return out;
}

inline void save_params(const NamedParams& params, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_params(params));
}

// Loads values into already-constructed tensors; names and shapes must match.
inline void load_params(const NamedParams& params, const std::filesystem::path& path) {
    std::string data = read_file(path);
    size_t off = 0;
    auto need = [&](size_t n) {
        if (off + n > data.size()) throw IoError("truncated weights file: " + path.string());
    };
    need(4);
    if (std::memcmp(data.data(), detail::kWeightsMagic, 4) != 0) {
        throw IoError("not a weights file (bad magic): " + path.string());
    }
    off = 4;
    need(4);
    uint32_t version;
    std::memcpy(&version, data.data() + off, 4);
    off += 4;
    if (version != detail::kWeightsVersion) {
        throw IoError("unsupported weights version " + std::to_string(version));
    }
    need(8);
    uint64_t count;
    std::memcpy(&count, data.data() + off, 8);
    off += 8;

    std::map<std::string, std::pair<std::vector<size_t>, std::vector<double>>> loaded;
    for (uint64_t i = 0; i < count; ++i) {
        need(4);
        uint32_t name_len;
        std::memcpy(&name_len, data.data() + off, 4);
        off += 4;
        need(name_len);
        std::string name(data.data() + off, name_len);
        off += name_len;
        need(4);
        uint32_t rank;
        std::memcpy(&rank, data.data() + off, 4);
        off += 4;
        std::vector<size_t> shape(rank);
        size_t numel = 1;
        for (uint32_t r = 0; r < rank; ++r) {
            need(8);
            uint64_t d;
            std::memcpy(&d, data.data() + off, 8);
            off += 8;
            shape[r] = d;
            numel *= d;
        }
        need(numel * sizeof(double));
        std::vector<double> values(numel);
        std::memcpy(values.data(), data.data() + off, numel * sizeof(double));
        off += numel * sizeof(double);
        loaded[name] = {std::move(shape), std::move(values)};
    }

    for (const auto& [name, t] : params) {
        auto it = loaded.find(name);
        if (it == loaded.end()) {
            throw IoError("weights file missing tensor \"" + name + "\": " + path.string());
        }
        if (it->second.first != t->shape) {
            throw IoError("weights file shape mismatch for \"" + name + "\"");
        }
        t->v = it->second.second;
    }
}

}  // namespace flood::nn
