#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "flood/common.hpp"
#include "flood/data.hpp"

namespace flood {

enum class FeatureKind : uint8_t { object_level = 0, scene_level = 1, fused = 2, text = 3 };

inline std::string to_string(FeatureKind k) {
    switch (k) {
        case FeatureKind::object_level: return "object";
        case FeatureKind::scene_level: return "scene";
        case FeatureKind::fused: return "fused";
        default: return "text";
    }
}

struct FeatureVector {
    std::vector<float> v;
    FeatureKind kind = FeatureKind::object_level;

    size_t dim() const { return v.size(); }
};

struct LabeledFeatureSet {
    std::vector<FeatureVector> vectors;  // uniform dimensionality
    std::vector<Label> labels;           // parallel to vectors

    size_t size() const { return vectors.size(); }

    size_t dim() const { return vectors.empty() ? 0 : vectors[0].dim(); }

    void validate() const {
        if (vectors.size() != labels.size()) {
            throw DataError("feature set: vectors and labels differ in length");
        }
        const size_t d = dim();
        for (size_t i = 0; i < vectors.size(); ++i) {
            if (vectors[i].dim() != d) {
                throw DataError("feature set: vector " + std::to_string(i) +
                                " has dimension " + std::to_string(vectors[i].dim()) +
                                ", expected " + std::to_string(d));
            }
            for (float x : vectors[i].v) {
                if (!std::isfinite(x)) {
                    throw DataError("feature set: non-finite entry in vector " +
                                    std::to_string(i));
                }
            }
        }
    }

    size_t count(Label l) const {
        size_t n = 0;
        for (Label x : labels) {
            if (x == l) ++n;
        }
        return n;
    }
};

// Binary feature file: magic, version, kind, n, d header followed by a
// row-major float32 matrix and one label byte per row.
namespace detail {
constexpr char kFeatureMagic[4] = {'F', 'L', 'F', 'V'};
constexpr uint32_t kFeatureVersion = 1;
}  // namespace detail

inline void save_features(const LabeledFeatureSet& set, const std::filesystem::path& path) {
    set.validate();
    if (path.extension() == ".csv") {
        std::string out;
        for (size_t j = 0; j < set.dim(); ++j) out += "f" + std::to_string(j) + ",";
        out += "label\n";
        char buf[48];
        for (size_t i = 0; i < set.size(); ++i) {
            for (float x : set.vectors[i].v) {
                std::snprintf(buf, sizeof(buf), "%.9g,", static_cast<double>(x));
                out += buf;
            }
            out += to_string(set.labels[i]) + "\n";
        }
        write_file_atomic(path, out);
        return;
    }
    std::string out;
    auto put_u32 = [&](uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); };
    auto put_u64 = [&](uint64_t v) { out.append(reinterpret_cast<const char*>(&v), 8); };
    out.append(detail::kFeatureMagic, 4);
    put_u32(detail::kFeatureVersion);
    out += static_cast<char>(set.vectors.empty() ? 0 : static_cast<uint8_t>(set.vectors[0].kind));
    put_u64(set.size());
    put_u64(set.dim());
    for (const auto& fv : set.vectors) {
        out.append(reinterpret_cast<const char*>(fv.v.data()), fv.v.size() * sizeof(float));
    }
    for (Label l : set.labels) {
        out += static_cast<char>(l == Label::relevant ? 1 : 0);
    }
    write_file_atomic(path, out);
}

inline LabeledFeatureSet load_features(const std::filesystem::path& path) {
    if (path.extension() == ".csv") {
        // CSV ingestion: header "f0,...,f{d-1},label", one row per vector.
        auto rows = detail::parse_csv(read_file(path));
        if (rows.empty()) throw DataError("feature CSV has no header: " + path.string());
        size_t d = rows[0].size() - 1;
        if (rows[0].empty() || trim(rows[0].back()) != "label") {
            throw DataError("feature CSV must end with a \"label\" column: " + path.string());
        }
        LabeledFeatureSet set;
        for (size_t r = 1; r < rows.size(); ++r) {
            if (rows[r].size() != d + 1) {
                throw DataError("feature CSV row " + std::to_string(r) + " has " +
                                std::to_string(rows[r].size()) + " cells, expected " +
                                std::to_string(d + 1));
            }
            FeatureVector fv;
            fv.v.reserve(d);
            for (size_t c = 0; c < d; ++c) {
                fv.v.push_back(std::stof(rows[r][c]));
            }
            set.vectors.push_back(std::move(fv));
            set.labels.push_back(label_from_string(trim(rows[r].back())));
        }
        set.validate();
        return set;
    }

    std::string data = read_file(path);
    size_t off = 0;
    auto need = [&](size_t n) {
        if (off + n > data.size()) throw DataError("truncated feature file: " + path.string());
    };
    need(4);
    if (std::memcmp(data.data(), detail::kFeatureMagic, 4) != 0) {
        throw DataError("not a feature file (bad magic): " + path.string());
    }
    off = 4;
    need(4);
    uint32_t version;
    std::memcpy(&version, data.data() + off, 4);
    off += 4;
    if (version != detail::kFeatureVersion) {
        throw DataError("unsupported feature file version " + std::to_string(version));
    }
    need(1);
    auto kind = static_cast<FeatureKind>(static_cast<uint8_t>(data[off]));
    off += 1;
    need(16);
    uint64_t n, d;
    std::memcpy(&n, data.data() + off, 8);
    off += 8;
    std::memcpy(&d, data.data() + off, 8);
    off += 8;
    need(n * d * sizeof(float) + n);
    LabeledFeatureSet set;
    set.vectors.resize(n);
    for (uint64_t i = 0; i < n; ++i) {
        set.vectors[i].kind = kind;
        set.vectors[i].v.resize(d);
        std::memcpy(set.vectors[i].v.data(), data.data() + off, d * sizeof(float));
        off += d * sizeof(float);
    }
    set.labels.resize(n);
    for (uint64_t i = 0; i < n; ++i) {
        set.labels[i] = data[off + i] ? Label::relevant : Label::not_relevant;
    }
    set.validate();
    return set;
}

}  // namespace flood
